"""
小规模精确贝叶斯

在节点数不超过 8、标识空间很小的玩具环上穷举键、伪查询目标与链接模式，
给出发起者/目标的精确后验，用来衡量启发式估计与精确值之间的差距。
这里假设各查询是否可链接相互独立，概率为 link_probability(f)。
"""
import itertools
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Mapping, Sequence

import numpy as np

from ..utils.exceptions import AnalysisError
from .linkability import POS_E, QueryRecord, query_links
from .static_ring import StaticRing

MAX_ORACLE_NODES = 8
MAX_ORACLE_BITS = 8


@lru_cache(maxsize=64)
def link_probability(f: float) -> float:
    """中继与被查询节点各自以概率 f 恶意时，单个查询可链接到发起者的概率（不计游走）"""
    sample = QueryRecord(lookup=0, relays=(1, 2, 3, 4), queried=POS_E, index=0)
    total = 0.0
    for pattern in itertools.product((False, True), repeat=POS_E):
        bad = {p + 1 for p, b in enumerate(pattern) if b}
        if query_links(sample, lambda x: x in bad).to_initiator:
            k = len(bad)
            total += f**k * (1 - f) ** (POS_E - k)
    return total


def _check(ring: StaticRing) -> None:
    if ring.n > MAX_ORACLE_NODES or ring.space.bits > MAX_ORACLE_BITS:
        raise AnalysisError(
            f"Exhaustive oracle is limited to {MAX_ORACLE_NODES} nodes and {MAX_ORACLE_BITS} bits",
            details={"n": ring.n, "bits": ring.space.bits},
        )


def key_share(ring: StaticRing) -> np.ndarray:
    """每个节点拥有的键占整个标识空间的比例"""
    gaps = np.array([ring.dist(ring.pred(i), i) for i in range(ring.n)], dtype=np.float64)
    return gaps / ring.space.size


def observation_likelihood(
    ring: StaticRing,
    initiator: int,
    key: int,
    linked: FrozenSet[int],
    p: float,
    k_dummy: int = 0,
) -> float:
    """P(可链接查询的节点集合 = linked | 发起者, 键)

    Args:
        ring: 玩具环
        initiator: 发起者下标
        key: 目标键
        linked: 观测到的可链接查询节点集合
        p: 单个查询可链接的概率
        k_dummy: 伪查询数（伪查询目标是随机键的归属节点）

    Returns:
        float: 似然
    """
    _check(ring)
    true_nodes = ring.trace(initiator, key).queried
    share = key_share(ring)
    total = 0.0
    for dummies in itertools.product(range(ring.n), repeat=k_dummy):
        prior = float(np.prod([share[d] for d in dummies])) if dummies else 1.0
        nodes = list(true_nodes) + list(dummies)
        for mask in itertools.product((False, True), repeat=len(nodes)):
            hit = frozenset(n for n, m in zip(nodes, mask) if m)
            if hit != linked:
                continue
            k = sum(mask)
            total += prior * p**k * (1 - p) ** (len(nodes) - k)
    return total


def _keys_of(ring: StaticRing, node: int) -> Iterable[int]:
    lo = int(ring.ids[ring.pred(node)])
    for off in range(1, ring.dist(ring.pred(node), node) + 1):
        yield (lo + off) % ring.space.size


def exact_target_posterior(
    ring: StaticRing,
    initiator: int,
    linked: FrozenSet[int],
    p: float,
    k_dummy: int = 0,
) -> np.ndarray:
    """已知发起者与其可链接查询集合时，目标的精确后验（键均匀）"""
    _check(ring)
    post = np.zeros(ring.n)
    for t in range(ring.n):
        post[t] = sum(observation_likelihood(ring, initiator, key, linked, p, k_dummy) for key in _keys_of(ring, t))
    if post.sum() <= 0:
        raise AnalysisError("Observation has zero likelihood under every target")
    return post / post.sum()


def exact_initiator_posterior(
    ring: StaticRing,
    linked_sets: Mapping[int, FrozenSet[int]],
    target: int,
    honest: Sequence[int],
    p: float,
    k_dummy: int = 0,
) -> Dict[int, float]:
    """哪个查找是目标查找的精确后验

    P(ψ | o) ∝ P(S_ψ | 目标 = T) / P(S_ψ)，其中发起者在诚实节点上均匀、键均匀。

    Args:
        ring: 玩具环
        linked_sets: 查找编号 → 可链接查询节点集合
        target: 已知目标下标
        honest: 诚实节点下标
        p: 单个查询可链接的概率
        k_dummy: 伪查询数

    Returns:
        Dict[int, float]: 查找编号 → 后验概率
    """
    _check(ring)
    keys_t = list(_keys_of(ring, target))
    all_keys = range(ring.space.size)
    scores: Dict[int, float] = {}
    for lookup, linked in linked_sets.items():
        given_t = np.mean([observation_likelihood(ring, i, k, linked, p, k_dummy) for i in honest for k in keys_t])
        marginal = np.mean([observation_likelihood(ring, i, k, linked, p, k_dummy) for i in honest for k in all_keys])
        scores[lookup] = float(given_t / marginal) if marginal > 0 else 0.0
    total = sum(scores.values())
    if total <= 0:
        raise AnalysisError("No lookup is consistent with the observed target")
    return {k: v / total for k, v in scores.items()}
