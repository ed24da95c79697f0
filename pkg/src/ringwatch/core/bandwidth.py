"""
带宽统计模块

消息大小按固定常量计算：路由项 10 字节，签名 40 字节 + 时间戳 4 字节，
证书 50 字节，洋葱封装每层 16 字节分组开销加 10 字节地址。
"""
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence

from ..config import BandwidthConfig


class MessageClass(str, Enum):
    """消息类别"""
    STABILIZE = "stabilize"
    PING = "ping"
    LOOKUP = "lookup"
    FINGER_UPDATE = "finger_update"
    SURVEILLANCE = "surveillance"
    WALK = "walk"
    DUMMY = "dummy"
    RECEIPT = "receipt"
    REPORT = "report"
    JOIN = "join"


@dataclass(frozen=True)
class MessageSizes:
    """各类消息的字节数"""
    item: int
    signature: int
    timestamp: int
    certificate: int
    onion_layer: int
    header: int
    fingers: int
    successors: int

    @classmethod
    def from_config(cls, config: BandwidthConfig, fingers: int, successors: int) -> "MessageSizes":
        return cls(
            item=config.item_bytes,
            signature=config.signature_bytes,
            timestamp=config.timestamp_bytes,
            certificate=config.certificate_bytes,
            onion_layer=config.onion_layer_bytes,
            header=config.header_bytes,
            fingers=fingers,
            successors=successors,
        )

    @property
    def signed(self) -> int:
        return self.signature + self.timestamp

    @property
    def signed_table(self) -> int:
        """一张带签名和证书的完整路由表"""
        items = self.fingers + 2 * self.successors
        return items * self.item + self.signed + self.certificate

    @property
    def signed_list(self) -> int:
        """一个带签名的后继（或前驱）列表"""
        return self.successors * self.item + self.signed + self.certificate

    @property
    def request(self) -> int:
        return self.header

    @property
    def receipt(self) -> int:
        return self.item + self.signed

    def onion(self, payload: int, relays: int) -> int:
        """经过 relays 个中继的洋葱封装消息"""
        return payload + relays * (self.onion_layer + self.header)


class BandwidthLedger:
    """按节点、按类别累计收发字节"""

    def __init__(self, sizes: MessageSizes, enabled: bool = True):
        self.sizes = sizes
        self.enabled = enabled
        self.sent: Dict[str, int] = defaultdict(int)
        self.received: Dict[str, int] = defaultdict(int)
        self.messages: Dict[str, int] = defaultdict(int)
        self.per_node: Dict[int, int] = defaultdict(int)

    def record(self, path: Sequence[int], msg_class: str, nbytes: int) -> None:
        """记录一次沿 path 的传输；中继既收又发"""
        if not self.enabled or nbytes <= 0:
            return
        cls = msg_class.value if isinstance(msg_class, MessageClass) else msg_class
        hops = len(path) - 1
        self.messages[cls] += 1
        self.sent[cls] += nbytes * hops
        self.received[cls] += nbytes * hops
        per_node = self.per_node
        for node in path:
            per_node[node] += nbytes
        for node in path[1:-1]:
            per_node[node] += nbytes

    def node_kbps(self, node: int, duration_ms: int) -> float:
        if duration_ms <= 0:
            return 0.0
        return self.per_node.get(node, 0) * 8 / 1000.0 / (duration_ms / 1000.0)

    def kbps_per_node(self, duration_ms: int, n_nodes: int) -> Dict[str, float]:
        """每节点平均发送速率（kbps），按类别"""
        if duration_ms <= 0 or n_nodes <= 0:
            return {}
        seconds = duration_ms / 1000.0
        return {
            cls: total * 8 / 1000.0 / seconds / n_nodes
            for cls, total in sorted(self.sent.items())
        }

    def report_rows(self, duration_ms: int, n_nodes: int) -> List[Dict[str, object]]:
        rates = self.kbps_per_node(duration_ms, n_nodes)
        rows = [
            {"message_class": cls, "messages": self.messages[cls], "bytes": self.sent[cls], "kbps_per_node": round(rate, 6)}
            for cls, rate in rates.items()
        ]
        rows.append(
            {
                "message_class": "total",
                "messages": sum(self.messages.values()),
                "bytes": sum(self.sent.values()),
                "kbps_per_node": round(sum(rates.values()), 6),
            }
        )
        return rows
