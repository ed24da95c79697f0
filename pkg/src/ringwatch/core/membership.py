"""
成员关系模块

维护当前存活集合（有序）以及每个曾经出现过的节点的加入/离开时间，
提供现时与历史两种存活判断。
"""
from bisect import bisect_left, insort
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional

from ..utils.exceptions import RingError
from .ring import IdSpace, clockwise_after, counter_clockwise_before, ground_truth_owner


@dataclass
class Lifespan:
    """节点生存区间"""
    joined_at: int
    departed_at: Optional[int] = None

    def covers(self, t: int) -> bool:
        return self.joined_at <= t and (self.departed_at is None or t < self.departed_at)


class Membership:
    """存活集合与成员日志"""

    def __init__(self, space: IdSpace):
        self.space = space
        self._ids: List[int] = []
        self._alive: set = set()
        self._history: Dict[int, Lifespan] = {}

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, node: int) -> bool:
        return node in self._alive

    def __iter__(self) -> Iterator[int]:
        return iter(self._ids)

    @property
    def ids(self) -> List[int]:
        """升序排列的存活节点（只读视图）"""
        return self._ids

    def known(self, node: int) -> bool:
        """节点是否曾经存在过（ID 不可复用）"""
        return node in self._history

    def add(self, node: int, t: int) -> None:
        if node in self._history:
            raise RingError(f"Node id {node} was already used")
        self._history[node] = Lifespan(joined_at=t)
        self._alive.add(node)
        insort(self._ids, node)

    def remove(self, node: int, t: int) -> bool:
        """移除节点，返回是否确实移除"""
        if node not in self._alive:
            return False
        self._alive.discard(node)
        idx = bisect_left(self._ids, node)
        del self._ids[idx]
        self._history[node].departed_at = t
        return True

    def is_alive(self, node: int) -> bool:
        return node in self._alive

    def alive_at(self, node: int, t: int) -> bool:
        """历史存活判断"""
        span = self._history.get(node)
        return span is not None and span.covers(t)

    def owner(self, v: int) -> int:
        return ground_truth_owner(v, self._ids)

    def successors_of(self, x: int, k: int) -> List[int]:
        return clockwise_after(x, self._ids, k)

    def predecessors_of(self, x: int, k: int) -> List[int]:
        return counter_clockwise_before(x, self._ids, k)

    def rank_after(self, x: int, y: int) -> int:
        """当前存活节点中位于 (x, y) 的个数，即 y 在 x 后继序列中的名次（从 0 开始）"""
        n = len(self._ids)
        if n == 0:
            return 0
        if x == y:
            return n - 1 if x in self._alive else n
        i = bisect_left(self._ids, x)
        j = bisect_left(self._ids, y)
        if x in self._alive:
            i += 1
        count = j - i
        return count + n if count < 0 else count

    def historical_rank(self, x: int, y: int, t: int) -> int:
        """t 时刻存活节点中位于 (x, y) 的个数"""
        space = self.space
        return sum(
            1
            for node, span in self._history.items()
            if span.covers(t) and space.in_open(node, x, y)
        )

    def alive_in_range(self, start: int, end: int, t: int) -> List[int]:
        """t 时刻存活且位于 [start, end) 的节点，按距 start 的顺时针距离排序"""
        space = self.space
        found = [
            node
            for node, span in self._history.items()
            if span.covers(t) and (node == start or space.in_open(node, start, end))
        ]
        found.sort(key=lambda n: space.distance(start, n))
        return found

    def settled_between(self, x: int, y: int, t: int, since: int) -> int:
        """t 时刻存活、不晚于 since 加入且位于 (x, y) 的节点个数"""
        space = self.space
        return sum(
            1
            for node, span in self._history.items()
            if span.covers(t) and span.joined_at <= since and space.in_open(node, x, y)
        )
