"""
试验世界抽样

在一张静态快照上抽取一次试验：恶意节点集合、并发查找（发起者诚实、键均匀）、
每次查找的伪查询排布与中继。中继对取自在指针表上的随机游走末两跳，
游走本身也会泄露发起者（首跳恶意时）。
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Set

import numpy as np

from ..config import AnonymityConfig
from ..core.anonpath import EnvelopeKind, schedule_dummies
from ..core.observations import ObservationLog, SharedIntel
from .linkability import LinkabilityGraph, LookupTranscript, QueryRecord, build_linkability, observe_transcripts, walk_linkable
from .static_ring import StaticRing


@dataclass
class World:
    """一次试验的完整真实情况；查找 0 是被度量的查找"""
    malicious: np.ndarray
    transcripts: List[LookupTranscript]

    def is_malicious(self, node: int) -> bool:
        return bool(self.malicious[node])

    @property
    def measured(self) -> LookupTranscript:
        return self.transcripts[0]

    def observe(self) -> ObservationLog:
        """合谋节点在本次试验中的观测日志"""
        intel = SharedIntel({int(i) for i in np.flatnonzero(self.malicious)}, capacity=None)
        return observe_transcripts(self.transcripts, intel)

    def linkability(self) -> LinkabilityGraph:
        return build_linkability(self.observe(), self.transcripts, self.is_malicious)


class WorldSampler:
    """试验世界抽样器

    Args:
        ring: 静态快照
        config: 匿名性分析配置
    """

    def __init__(self, ring: StaticRing, config: AnonymityConfig, k_dummy: Optional[int] = None):
        self.ring = ring
        self.config = config
        self.fraction = config.fraction
        self.k_dummy = config.k_dummy if k_dummy is None else k_dummy
        self.multipath = config.multipath
        self.walk_length = config.walk_length or max(1, math.ceil(math.log2(ring.n)))
        self.concurrent = max(1, math.ceil(config.concurrent_rate * ring.n))

    def malicious_mask(self, rng: np.random.Generator) -> np.ndarray:
        """恰好 floor(f·N) 个恶意节点"""
        n = self.ring.n
        mask = np.zeros(n, dtype=bool)
        mask[rng.permutation(n)[: int(math.floor(self.fraction * n))]] = True
        return mask

    def honest_initiator(self, mask: np.ndarray, rng: np.random.Generator) -> int:
        honest = np.flatnonzero(~mask)
        return int(honest[rng.integers(len(honest))])

    def random_key(self, rng: np.random.Generator) -> int:
        return int(rng.integers(0, self.ring.space.size))

    def walks(self, initiator: int, count: int, rng: np.random.Generator) -> np.ndarray:
        """count 条从发起者出发、长 2l 跳的指针表随机游走（count × 2l）"""
        steps = 2 * self.walk_length
        hops = np.empty((count, steps), dtype=np.int64)
        cur = np.full(count, initiator, dtype=np.int64)
        for s in range(steps):
            cur = self.ring.fingers[cur, rng.integers(0, self.ring.F, size=count)]
            hops[:, s] = cur
        return hops

    def sample_lookup(
        self,
        lookup: int,
        initiator: int,
        key: int,
        mask: np.ndarray,
        rng: np.random.Generator,
    ) -> LookupTranscript:
        """抽取一次匿名查找的完整传输

        Args:
            lookup: 查找编号
            initiator: 发起者下标
            key: 目标键
            mask: 恶意掩码
            rng: 随机流

        Returns:
            LookupTranscript: 传输记录（含游走泄露）
        """
        ring = self.ring
        trace = ring.trace(initiator, key)
        plan = schedule_dummies(trace.hop_count, self.k_dummy, rng)
        exits = len(plan) if self.multipath else min(1, len(plan))
        walks = self.walks(initiator, exits + 1, rng)

        walk_observed = False
        walk_relays: Set[int] = set()
        for row in walks:
            seen, linked = walk_linkable(row.tolist(), lambda x: bool(mask[x]))
            walk_observed = walk_observed or seen
            walk_relays |= linked

        a, b = int(walks[0, -2]), int(walks[0, -1])
        queries: List[QueryRecord] = []
        true_iter = iter(trace.queried)
        for idx, kind in enumerate(plan):
            row = walks[1 + (idx if self.multipath else 0)]
            c, d = int(row[-2]), int(row[-1])
            if kind == EnvelopeKind.DUMMY:
                queried = ring.owner(self.random_key(rng))
                dummy = True
            else:
                queried = next(true_iter)
                dummy = False
            queries.append(QueryRecord(lookup=lookup, relays=(a, b, c, d), queried=queried, index=idx, dummy=dummy))
        return LookupTranscript(
            lookup=lookup,
            initiator=initiator,
            target=trace.target,
            queries=queries,
            walk_relays=frozenset(walk_relays),
            walk_observed=walk_observed,
        )

    def sample(self, rng: np.random.Generator, mask: Optional[np.ndarray] = None) -> World:
        """抽取一次试验的并发查找世界"""
        mask = self.malicious_mask(rng) if mask is None else mask
        transcripts = [
            self.sample_lookup(k, self.honest_initiator(mask, rng), self.random_key(rng), mask, rng)
            for k in range(self.concurrent)
        ]
        return World(malicious=mask, transcripts=transcripts)
