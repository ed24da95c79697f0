"""
观测记录模块

恶意节点看到的每一次传输都记为一条 Observation，经零延迟的共享通道汇总。
"""
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Deque, Dict, Hashable, Iterable, Iterator, List, Optional, Set, Tuple


class ObservationClass(str, Enum):
    """观测类型"""
    QUERY_SEEN = "query_seen"
    RELAY_HOP = "relay_hop"
    WALK_HOP = "walk_hop"
    INITIATOR_ADJACENT = "initiator_adjacent"
    TARGET_SELF_KNOWLEDGE = "target_self_knowledge"


@dataclass(frozen=True)
class Observation:
    """一条对手可见事件

    endpoints 为观测者相邻的节点（前一跳、后一跳；被查询节点只有前一跳）。
    token 标识所属的传输：事件模拟中为查找编号，匿名性分析中为 (查找, 查询序号)。
    """
    observer: int
    cls: ObservationClass
    endpoints: Tuple[Hashable, ...]
    time: int
    token: Optional[Any] = None


class ObservationLog:
    """观测日志（可设容量上限）"""

    def __init__(self, capacity: Optional[int] = None):
        self._items: Deque[Observation] = deque(maxlen=capacity)
        self.total = 0

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Observation]:
        return iter(self._items)

    def append(self, obs: Observation) -> None:
        self._items.append(obs)
        self.total += 1

    def extend(self, items: Iterable[Observation]) -> None:
        for obs in items:
            self.append(obs)


class SharedIntel:
    """合谋节点共享的信息

    - 观测日志；
    - 恶意成员表；
    - 指针检查时编造的前驱列表（掩护信息），供之后的后继列表应答保持一致。
    """

    def __init__(self, malicious: Optional[Set[int]] = None, capacity: Optional[int] = 100_000):
        self.malicious: Set[int] = set(malicious or ())
        self.log = ObservationLog(capacity)
        self.cover_until: Dict[int, int] = {}
        self.cover_target: Dict[int, int] = {}

    def is_malicious(self, node: int) -> bool:
        return node in self.malicious

    def observe(self, observer: int, cls: ObservationClass, endpoints: Tuple[Hashable, ...], time: int, token: Any = None) -> None:
        if observer in self.malicious:
            self.log.append(Observation(observer=observer, cls=cls, endpoints=endpoints, time=time, token=token))

    def observe_path(self, path: List[int], time: int, token: Any = None) -> int:
        """记录一次中继路径传输中所有恶意节点的观测，返回记录条数"""
        count = 0
        last = len(path) - 1
        for k in range(1, last + 1):
            node = path[k]
            if node not in self.malicious:
                continue
            if k == last:
                self.observe(node, ObservationClass.QUERY_SEEN, (path[k - 1],), time, token)
            elif k == 1:
                self.observe(node, ObservationClass.INITIATOR_ADJACENT, (path[0], path[2]), time, token)
            else:
                self.observe(node, ObservationClass.RELAY_HOP, (path[k - 1], path[k + 1]), time, token)
            count += 1
        return count

    def register_cover(self, colluders: Iterable[int], target: int, until: int) -> None:
        for node in colluders:
            self.cover_until[node] = until
            self.cover_target[node] = target

    def covering(self, node: int, now: int) -> Optional[int]:
        """node 当前是否处在某个掩护窗口中，返回被掩护的指针"""
        until = self.cover_until.get(node)
        if until is None or now > until:
            return None
        return self.cover_target.get(node)
