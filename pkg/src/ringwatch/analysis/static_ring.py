"""
静态快照模块

以 numpy 有序 ID 数组表示的静态 Chord 环，向量化地构建指针表与后继列表，
并提供与 iterative_lookup 下一跳规则一致的同步贪心查找与虚拟查找。
节点在这里一律用下标（0..N-1）表示。
"""
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from ..core.ring import IdSpace
from ..utils.exceptions import RingError

PATH_CACHE_SIZE = 200_000


@dataclass(frozen=True)
class LookupTrace:
    """一次静态查找的轨迹"""
    initiator: int
    key: int
    target: int
    queried: Tuple[int, ...]

    @property
    def hop_count(self) -> int:
        return len(self.queried)


class StaticRing:
    """静态环快照

    Args:
        ids: 节点 ID（会被排序去重）
        bits: 标识环位宽 m
        fingers: 指针表大小 F
        successors: 后继列表长度 S
    """

    def __init__(self, ids: np.ndarray, bits: int, fingers: int, successors: int):
        self.space = IdSpace(bits)
        self.ids = np.unique(np.asarray(ids, dtype=np.int64))
        self.n = len(self.ids)
        if self.n < 2:
            raise RingError(f"A static ring needs at least 2 nodes, got {self.n}")
        if fingers > bits:
            raise RingError(f"Finger count {fingers} exceeds ring bit-width {bits}")
        self.F = fingers
        self.S = min(successors, self.n - 1)
        self.fingers = self._build_fingers()
        self.successors = (np.arange(self.n)[:, None] + np.arange(1, self.S + 1)[None, :]) % self.n
        self._succ_span = self.distance_idx(np.arange(self.n), self.successors[:, -1])
        self._cand: List[np.ndarray] = []
        self._cand_dist: List[List[int]] = []
        self._build_candidates()
        self._path = lru_cache(maxsize=PATH_CACHE_SIZE)(self._trace_path)

    @classmethod
    def random(cls, n: int, bits: int, fingers: int, successors: int, rng: np.random.Generator) -> "StaticRing":
        """在 2^bits 环上均匀抽取 n 个不同的 ID"""
        size = 1 << bits
        if n > size:
            raise RingError(f"Cannot place {n} nodes on a ring of size {size}")
        ids = np.unique(rng.integers(0, size, size=n, dtype=np.int64))
        while len(ids) < n:
            extra = rng.integers(0, size, size=n - len(ids), dtype=np.int64)
            ids = np.unique(np.concatenate([ids, extra]))
        return cls(ids, bits, fingers, successors)

    def _build_fingers(self) -> np.ndarray:
        shift = self.space.bits - self.F
        offsets = np.array([1 << (shift + i) for i in range(self.F)], dtype=np.int64)
        targets = (self.ids[:, None] + offsets[None, :]) % self.space.size
        return np.searchsorted(self.ids, targets) % self.n

    def _build_candidates(self) -> None:
        """每个节点的前向候选（指针 ∪ 后继），按顺时针距离升序"""
        table = np.concatenate([self.fingers, self.successors], axis=1)
        for i in range(self.n):
            cand = np.unique(table[i])
            cand = cand[cand != i]
            dist = self.distance_idx(np.full(len(cand), i), cand)
            order = np.argsort(dist, kind="stable")
            self._cand.append(cand[order])
            self._cand_dist.append([int(d) for d in dist[order]])

    def distance_idx(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """节点下标 a 到 b 的顺时针 ID 距离（向量化）"""
        return (self.ids[b] - self.ids[a]) % self.space.size

    def dist(self, a: int, b: int) -> int:
        return int((int(self.ids[b]) - int(self.ids[a])) % self.space.size)

    def key_dist(self, a: int, key: int) -> int:
        return int((key - int(self.ids[a])) % self.space.size)

    def owner(self, key: int) -> int:
        """key 的真实归属节点下标"""
        return int(np.searchsorted(self.ids, key % self.space.size)) % self.n

    def succ(self, i: int) -> int:
        return (i + 1) % self.n

    def pred(self, i: int) -> int:
        return (i - 1) % self.n

    def candidates(self, i: int) -> np.ndarray:
        return self._cand[i]

    def trace(self, initiator: int, key: int) -> LookupTrace:
        """从发起者自己的表出发的贪心迭代查找"""
        queried: List[int] = []
        cur = initiator
        while self.key_dist(cur, key) > int(self._succ_span[cur]):
            d = self.key_dist(cur, key)
            pos = bisect_left(self._cand_dist[cur], d) - 1
            if pos < 0:
                break
            cur = int(self._cand[cur][pos])
            queried.append(cur)
            if len(queried) > self.n:
                raise RingError(f"Lookup for key {key} from {initiator} did not converge")
        return LookupTrace(initiator=initiator, key=key, target=self.owner(key), queried=tuple(queried))

    def next_toward(self, cur: int, dest: int) -> int:
        """cur 的候选中位于 (cur, dest] 内离 dest 最近的节点"""
        pos = bisect_right(self._cand_dist[cur], self.dist(cur, dest)) - 1
        return int(self._cand[cur][pos])

    def virtual_path(self, start: int, end: int) -> Tuple[int, ...]:
        """从 start 到 end 的虚拟查找路径（含两端）

        使用真实路由表；若 start 与 end 都在某次查找的路径上，
        返回的正是那次查找在两者之间经过的节点。
        """
        return self._path(start, end)

    def _trace_path(self, start: int, end: int) -> Tuple[int, ...]:
        out = [start]
        cur = start
        while cur != end:
            cur = self.next_toward(cur, end)
            out.append(cur)
        return tuple(out)

    def hops(self, start: int, end: int) -> int:
        return len(self.virtual_path(start, end)) - 1

    def largest_hop(self, path: Tuple[int, ...]) -> int:
        """路径上相邻两节点之间最大的 ID 差"""
        if len(path) < 2:
            return 0
        return max(self.dist(a, b) for a, b in zip(path, path[1:]))

    def range_size(self, lower: int, upper: int) -> int:
        """(lower, upper] 内的节点数"""
        z = (upper - lower) % self.n
        return z if z else self.n
