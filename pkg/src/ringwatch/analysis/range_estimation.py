"""
范围估计模块

- range_estimate: 由按发送顺序排列的可链接查询推出目标的下界与上界；
- filter_subsets: 按时序/位置一致性与虚拟查找成员关系过滤候选非伪查询子集。
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..utils import log
from ..utils.exceptions import AnalysisError
from .linkability import QueryRecord
from .static_ring import StaticRing

GammaFn = Callable[[int], np.ndarray]
Subset = Tuple[QueryRecord, ...]


def uniform_gamma(z: int) -> np.ndarray:
    return np.full(z, 1.0 / z)


@dataclass
class EstimationRange:
    """目标位置的估计范围 (lower, upper]，weights[i-1] 为第 i 个节点是目标的概率"""
    lower: int
    upper: int
    size: int
    weights: np.ndarray

    def nodes(self, n: int) -> np.ndarray:
        return (self.lower + 1 + np.arange(self.size)) % n

    def location(self, node: int, n: int) -> Optional[int]:
        """node 在范围中的位置（从 1 开始），不在范围内返回 None"""
        loc = (node - self.lower) % n
        if 1 <= loc <= self.size:
            return loc
        return None

    def contains(self, node: int, n: int) -> bool:
        return self.location(node, n) is not None


def single_query_range(ring: StaticRing, node: int, gamma: GammaFn = uniform_gamma) -> EstimationRange:
    """只有一个查询时：succ(E) 为下界，pred(E) 为上界"""
    z = ring.n - 1
    return EstimationRange(lower=node, upper=ring.pred(node), size=z, weights=gamma(z))


def range_estimate(ring: StaticRing, queried: Sequence[int], gamma: GammaFn = uniform_gamma) -> EstimationRange:
    """范围估计攻击

    以最后一个查询 E_j 为下界；上界从 E_i 开始，沿 E_i 到 E_j 的虚拟查找，
    对每对相邻查询 (E_k, E_{k+1})，取 E_k 候选表中排在 E_{k+1} 之后的那一项收紧。

    Args:
        ring: 静态快照
        queried: 按发送顺序排列的被查询节点（假定都是真查询）
        gamma: 范围大小 → 位置权重

    Returns:
        EstimationRange: 估计范围

    Raises:
        AnalysisError: 查询为空或顺序与顺时针推进不一致
    """
    if not queried:
        raise AnalysisError("Range estimation needs at least one query")
    if len(queried) == 1:
        return single_query_range(ring, queried[0], gamma)
    first, last = queried[0], queried[-1]
    prev = 0
    for q in queried[1:]:
        d = ring.dist(first, q)
        if d <= prev:
            raise AnalysisError(
                "Inconsistent query order for range estimation",
                details={"queried": list(queried)},
            )
        prev = d
    upper = ring.pred(first)
    best = ring.dist(last, upper)
    path = ring.virtual_path(first, last)
    for x, y in zip(path, path[1:]):
        cands = ring.candidates(x)
        p = int(np.flatnonzero(cands == y)[0])
        if p + 1 >= len(cands):
            continue
        bound = int(cands[p + 1])
        d = ring.dist(last, bound)
        if 0 < d < best:
            upper, best = bound, d
    z = ring.range_size(last, upper)
    return EstimationRange(lower=last, upper=upper, size=z, weights=gamma(z))


def largest_hop(ring: StaticRing, subset: Sequence[QueryRecord]) -> int:
    """子集首尾之间虚拟查找的最大单跳 ID 差"""
    if len(subset) < 2:
        return 0
    return ring.largest_hop(ring.virtual_path(subset[0].queried, subset[-1].queried))


@dataclass
class FilterResult:
    """通过过滤的子集；sampled 表示超过上限后改为抽样"""
    subsets: List[Subset]
    sampled: bool = False


class _SubsetRules:
    """两条过滤规则（以及已知发送序号时的跳数上限）"""

    def __init__(self, ring: StaticRing, reference: Optional[int], indexed: bool):
        self.ring = ring
        self.reference = reference
        self.indexed = indexed

    def _pos(self, origin: int, q: QueryRecord) -> int:
        return self.ring.dist(origin, q.queried)

    def extends(self, members: Sequence[QueryRecord], cand: QueryRecord) -> bool:
        """members（已通过）追加 cand 后是否仍通过"""
        ring = self.ring
        last = members[-1]
        if cand.index <= last.index:
            return False
        origin = self.reference if self.reference is not None else members[0].queried
        if self._pos(origin, cand) <= self._pos(origin, last):
            return False
        if self.indexed and ring.hops(last.queried, cand.queried) > cand.index - last.index:
            return False
        on_path: Set[int] = set(ring.virtual_path(members[0].queried, cand.queried))
        return all(m.queried in on_path for m in members[1:])

    def single(self, q: QueryRecord) -> bool:
        if self.reference is None:
            return True
        return q.queried != self.reference

    def check(self, subset: Sequence[QueryRecord]) -> bool:
        if not subset or not self.single(subset[0]):
            return False
        for k in range(1, len(subset)):
            if not self.extends(subset[:k], subset[k]):
                return False
        return True


def filter_subsets(
    ring: StaticRing,
    queries: Sequence[QueryRecord],
    reference: Optional[int] = None,
    indexed: bool = False,
    cap: int = 20,
    samples: int = 4096,
    rng: Optional[np.random.Generator] = None,
    budget: int = 1 << 16,
) -> FilterResult:
    """过滤必然含伪查询的子集

    规则：先发送的查询在环上必须先出现（以发起者或子集首项为参照）；
    首尾之外的成员必须在首尾之间的虚拟查找路径上。已知发送序号时，
    相邻成员之间的虚拟跳数不得超过序号差。

    Args:
        ring: 静态快照
        queries: 可链接查询集合
        reference: 已知的发起者下标
        indexed: 攻击者是否掌握全部发送序号（A 或 B 恶意）
        cap: 精确枚举的集合大小上限
        samples: 超过上限时抽样的子集数
        rng: 抽样随机流
        budget: 精确枚举时允许的子集数上限，超过即改为抽样

    Returns:
        FilterResult: 通过过滤的非空子集（空输入时为 [()]）
    """
    if not queries:
        return FilterResult(subsets=[()])
    ordered = sorted(queries, key=lambda q: q.index)
    rules = _SubsetRules(ring, reference, indexed)
    if len(ordered) <= cap:
        out = _enumerate(ordered, rules, budget)
        if out is not None:
            return FilterResult(subsets=out)
    log.debug("Subset filter over %d queries switched to sampling", len(ordered))
    return FilterResult(subsets=_sample(ordered, rules, samples, rng or np.random.default_rng(0)), sampled=True)


def _enumerate(ordered: List[QueryRecord], rules: _SubsetRules, budget: int) -> Optional[List[Subset]]:
    out: List[Subset] = []
    stack: List[Tuple[Subset, int]] = [((q,), k + 1) for k, q in reversed(list(enumerate(ordered))) if rules.single(q)]
    while stack:
        members, nxt = stack.pop()
        out.append(members)
        if len(out) > budget:
            return None
        for k in range(len(ordered) - 1, nxt - 1, -1):
            cand = ordered[k]
            if rules.extends(members, cand):
                stack.append(((*members, cand), k + 1))
    return out


def _sample(ordered: List[QueryRecord], rules: _SubsetRules, samples: int, rng: np.random.Generator) -> List[Subset]:
    seen: Set[Tuple[int, ...]] = set()
    out: List[Subset] = []
    for k, q in enumerate(ordered):
        if rules.single(q):
            seen.add((k,))
            out.append((q,))
    picks = rng.random((samples, len(ordered))) < 0.5
    for row in picks:
        idx = tuple(int(i) for i in np.flatnonzero(row))
        if len(idx) < 2 or idx in seen:
            continue
        seen.add(idx)
        subset = tuple(ordered[i] for i in idx)
        if rules.check(subset):
            out.append(subset)
    return out
