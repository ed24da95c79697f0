"""
证明存档模块

- ProofQueue: 稳定化过程中收到的最近 Q 个带签名后继列表；
- FingerProofLog: 每个指针项的来源（解析出该指针的带签名路由表，或占位标记）。
"""
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Deque, Iterator, List, Optional

from .routing_table import RoutingTable


@dataclass(frozen=True)
class ProofEntry:
    """一条证明：收到的带签名表及接收时间"""
    table: RoutingTable
    received_at: int


class ProofQueue:
    """按接收时间排序的环形缓冲"""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._entries: Deque[ProofEntry] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ProofEntry]:
        return iter(self._entries)

    def append(self, table: RoutingTable, received_at: int) -> bool:
        """存入一条证明；与上一条邻居列表相同的证明不重复存放，返回是否存入"""
        if self._entries and self._entries[-1].table.same_neighbors(table):
            return False
        self._entries.append(ProofEntry(table=table, received_at=received_at))
        return True

    def latest_before(self, t: int) -> Optional[ProofEntry]:
        """接收时间不晚于 t 的最新证明"""
        for entry in reversed(self._entries):
            if entry.received_at <= t:
                return entry
        return None

    def covers(self, t: int) -> bool:
        """队列中是否仍有不晚于 t 的证明（否则已被滚动淘汰）"""
        return bool(self._entries) and self._entries[0].received_at <= t


class FingerSource(str, Enum):
    """指针项来源"""
    PLACEHOLDER = "placeholder"
    LOOKUP = "lookup"


@dataclass(frozen=True)
class FingerProof:
    """指针项 i 在 set_at 时刻被设置为 finger 的依据"""
    finger: int
    set_at: int
    source: FingerSource
    resolver_table: Optional[RoutingTable] = None


class FingerProofLog:
    """每个指针项保留最近几次设置记录"""

    def __init__(self, fingers: int, depth: int = 4):
        self._logs: List[Deque[FingerProof]] = [deque(maxlen=depth) for _ in range(fingers)]

    def record(self, index: int, proof: FingerProof) -> None:
        """记录一次设置；指针与来源都未变化时保留更早的记录"""
        log = self._logs[index]
        if log and log[-1].finger == proof.finger and log[-1].source == proof.source:
            return
        log.append(proof)

    def current(self, index: int) -> Optional[FingerProof]:
        log = self._logs[index]
        return log[-1] if log else None

    def latest_before(self, index: int, t: int) -> Optional[FingerProof]:
        for proof in reversed(self._logs[index]):
            if proof.set_at <= t:
                return proof
        return None

    def covers(self, index: int, t: int) -> bool:
        log = self._logs[index]
        return bool(log) and log[0].set_at <= t
