"""
熵估计模块

按攻击者观测到的情形计算发起者熵 H(I) 与目标熵 H(T)：

H(I):
- 目标诚实：log2((1-f)N)；
- 目标恶意但无可链接的真查询：发起者被观测时取被观测诚实发起者数的对数，否则 log2((1-f)N)；
- 否则在有可链接查询的查找上按 ξ(离目标的最小虚拟跳数) 加权，再按发起者合并。

H(T)（发起者未被观测时为 log2 N）:
- O_l（有可链接到发起者的查询）：对通过过滤的子集按 χ 加权混合其范围上的 γ；
- O_d 情形 1（发起者的查询都未被观测）：H_m；
- O_d 情形 2（有可链接到 B 的查询）：f·log2(#恶意目标) + (1-f)·H(X)，X 在 Ψ^B 上平均；
- O_d 情形 3：同样形式，X 在全部被观测查询的单查询范围上平均。
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import AnonymityConfig
from .linkability import LinkabilityGraph, LookupView, QueryRecord
from .presim import PresimTables
from .range_estimation import filter_subsets, range_estimate, single_query_range
from .static_ring import StaticRing
from .world import World


def log2n(n: float) -> float:
    return math.log2(max(1.0, n))


def shannon(p: np.ndarray) -> float:
    """以 2 为底的 Shannon 熵（忽略零概率项）"""
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    if p.size == 0:
        return 0.0
    p = p / p.sum()
    return float(-(p * np.log2(p)).sum())


def h_malicious(n: int, f: float, malicious_targets: int) -> float:
    """H_m = (1-f)·log2((1-f)N) + f·log2(#恶意目标)"""
    return (1 - f) * log2n((1 - f) * n) + f * log2n(malicious_targets)


@dataclass
class TrialEntropy:
    """单次试验的熵与所处分支"""
    h_initiator: float
    h_target: float
    initiator_branch: str
    target_branch: str
    sampled: bool = False


def initiator_posterior(ring: StaticRing, graph: LinkabilityGraph, target: int, tables: PresimTables) -> Dict[int, float]:
    """发起者后验：Ψ^l 中每个查找按 ξ(min hops(E, T)) 加权，再按发起者合并

    Returns:
        Dict[int, float]: 发起者下标 → 概率（和为 1）
    """
    views = graph.with_linkable()
    scores = np.array(
        [tables.xi(min(ring.hops(q.queried, target) for q in v.linkable)) for v in views],
        dtype=np.float64,
    )
    if scores.sum() <= 0:
        scores = np.ones(len(views))
    scores = scores / scores.sum()
    out: Dict[int, float] = {}
    for v, s in zip(views, scores):
        init = v.transcript.initiator
        out[init] = out.get(init, 0.0) + float(s)
    return out


def entropy_initiator(
    ring: StaticRing,
    graph: LinkabilityGraph,
    view: LookupView,
    world: World,
    f: float,
    tables: PresimTables,
) -> Tuple[float, str]:
    n = ring.n
    h_max = log2n((1 - f) * n)
    if not view.target_observed:
        return h_max, "target_honest"
    if not view.true_linkable():
        if view.initiator_observed:
            return log2n(graph.observed_honest_initiators(world.is_malicious)), "initiator_seen"
        return h_max, "unlinked"
    posterior = initiator_posterior(ring, graph, view.transcript.target, tables)
    return shannon(np.fromiter(posterior.values(), dtype=np.float64)), "linked"


def _subset_mixture(
    ring: StaticRing,
    queries: Sequence[QueryRecord],
    reference: Optional[int],
    indexed: bool,
    tables: PresimTables,
    config: AnonymityConfig,
    rng: np.random.Generator,
    acc: np.ndarray,
    scale: float,
) -> bool:
    """把 Σ_s P(s)·γ(G(s)) 累加到 acc（乘以 scale），返回是否使用了抽样"""
    result = filter_subsets(
        ring,
        queries,
        reference=reference,
        indexed=indexed,
        cap=config.subset_cap,
        samples=config.subset_samples,
        rng=rng,
    )
    subsets = [s for s in result.subsets if s]
    if not subsets:
        return result.sampled
    weights = np.array(
        [tables.chi(len(s), ring.largest_hop(ring.virtual_path(s[0].queried, s[-1].queried)) if len(s) > 1 else 0) for s in subsets],
        dtype=np.float64,
    )
    if weights.sum() <= 0:
        weights = np.ones(len(subsets))
    weights = weights / weights.sum()
    n = ring.n
    for s, w in zip(subsets, weights):
        est = range_estimate(ring, [q.queried for q in s], tables.gamma_weights)
        acc[est.nodes(n)] += scale * w * est.weights
    return result.sampled


def entropy_target(
    ring: StaticRing,
    graph: LinkabilityGraph,
    view: LookupView,
    world: World,
    f: float,
    tables: PresimTables,
    config: AnonymityConfig,
    rng: np.random.Generator,
) -> Tuple[float, str, bool]:
    n = ring.n
    if not view.initiator_observed:
        return math.log2(n), "initiator_hidden", False
    mal_targets = graph.malicious_targets(world.is_malicious)
    h_m = h_malicious(n, f, mal_targets)
    acc = np.zeros(n)

    if view.linkable:
        if not view.true_linkable():
            return h_m, "linked_dummies", False
        sampled = _subset_mixture(
            ring, view.linkable, view.transcript.initiator, view.indexed, tables, config, rng, acc, 1.0
        )
        return shannon(acc), "linked", sampled

    if not view.observed:
        return h_m, "unobserved", False

    mixed = f * log2n(mal_targets)
    if view.linkable_to_middle:
        if not view.true_linkable_to_middle():
            return h_m, "middle_dummies", False
        candidates = graph.with_middle_links()
        sampled = False
        for other in candidates:
            sampled = _subset_mixture(
                ring, other.linkable_to_middle, None, other.indexed, tables, config, rng, acc, 1.0 / len(candidates)
            ) or sampled
        return mixed + (1 - f) * shannon(acc), "middle", sampled

    if not view.true_observed():
        return h_m, "observed_dummies", False
    observed: List[QueryRecord] = graph.observed_queries()
    weights = tables.gamma_weights(n - 1)
    share = 1.0 / len(observed)
    for q in observed:
        est = single_query_range(ring, q.queried, lambda z: weights)
        acc[est.nodes(n)] += share * est.weights
    return mixed + (1 - f) * shannon(acc), "observed", False


def measure_trial(
    ring: StaticRing,
    world: World,
    tables: PresimTables,
    config: AnonymityConfig,
    rng: np.random.Generator,
    graph: Optional[LinkabilityGraph] = None,
) -> TrialEntropy:
    """计算被度量查找（world.measured）的 H(I) 与 H(T)"""
    graph = graph or world.linkability()
    view = graph.view(world.measured.lookup)
    f = config.fraction
    h_i, branch_i = entropy_initiator(ring, graph, view, world, f, tables)
    h_t, branch_t, sampled = entropy_target(ring, graph, view, world, f, tables, config, rng)
    return TrialEntropy(h_initiator=h_i, h_target=h_t, initiator_branch=branch_i, target_branch=branch_t, sampled=sampled)
