"""
蒙特卡洛试验模块

快照只构建一次；每次试验重抽恶意集合与并发查找，计算被度量查找的熵，
最后给出均值、95% 置信区间、信息泄露以及查询不可链接性。
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..config import AnonymityConfig
from ..utils import log
from ..utils.stats import mean_ci
from .entropy import TrialEntropy, log2n, measure_trial
from .presim import PresimTables
from .static_ring import StaticRing
from .world import WorldSampler

ProgressFn = Callable[[int], None]


@dataclass
class EntropyResult:
    """一组参数下的熵估计汇总"""
    n_nodes: int
    fraction: float
    concurrent_rate: float
    k_dummy: int
    multipath: bool
    trials: int
    h_initiator: float
    h_initiator_ci: float
    h_target: float
    h_target_ci: float
    h_initiator_max: float
    h_target_max: float
    leak_initiator: float
    leak_target: float
    sampled_trials: int = 0
    linked_pairs: int = 0
    concurrent_pairs: int = 0
    branches: Dict[str, int] = field(default_factory=dict)

    @property
    def unlinkability(self) -> float:
        """同一发起者的并发查找对中不可链接的比例"""
        if self.concurrent_pairs == 0:
            return 1.0
        return 1.0 - self.linked_pairs / self.concurrent_pairs

    def row(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("branches")
        data["unlinkability"] = self.unlinkability
        return data


def run_trials(
    ring: StaticRing,
    config: AnonymityConfig,
    tables: PresimTables,
    rng: np.random.Generator,
    trials: Optional[int] = None,
    k_dummy: Optional[int] = None,
    progress: Optional[ProgressFn] = None,
) -> EntropyResult:
    """运行蒙特卡洛试验

    Args:
        ring: 静态快照
        config: 匿名性分析配置
        tables: 预模拟表
        rng: 随机流
        trials: 试验次数，默认取 config.trials
        k_dummy: 覆盖伪查询数
        progress: 每完成一次试验回调一次

    Returns:
        EntropyResult: 汇总结果
    """
    count = config.trials if trials is None else trials
    sampler = WorldSampler(ring, config, k_dummy=k_dummy)
    f = config.fraction
    h_i = np.empty(count)
    h_t = np.empty(count)
    branches: Dict[str, int] = {}
    sampled = linked = pairs = 0
    for k in range(count):
        world = sampler.sample(rng)
        graph = world.linkability()
        outcome: TrialEntropy = measure_trial(ring, world, tables, config, rng, graph=graph)
        h_i[k] = outcome.h_initiator
        h_t[k] = outcome.h_target
        for key in (f"I:{outcome.initiator_branch}", f"T:{outcome.target_branch}"):
            branches[key] = branches.get(key, 0) + 1
        sampled += int(outcome.sampled)
        lp, tp = graph.linked_pairs()
        linked += lp
        pairs += tp
        if progress:
            progress(1)

    mean_i, ci_i = mean_ci(h_i)
    mean_t, ci_t = mean_ci(h_t)
    max_i = log2n((1 - f) * ring.n)
    max_t = math.log2(ring.n)
    result = EntropyResult(
        n_nodes=ring.n,
        fraction=f,
        concurrent_rate=config.concurrent_rate,
        k_dummy=sampler.k_dummy,
        multipath=config.multipath,
        trials=count,
        h_initiator=mean_i,
        h_initiator_ci=ci_i,
        h_target=mean_t,
        h_target_ci=ci_t,
        h_initiator_max=max_i,
        h_target_max=max_t,
        leak_initiator=max_i - mean_i,
        leak_target=max_t - mean_t,
        sampled_trials=sampled,
        linked_pairs=linked,
        concurrent_pairs=pairs,
        branches=branches,
    )
    if sampled:
        log.warning("%d of %d trials used sampled subset filtering", sampled, count)
    log.info(
        "H(I)=%.3f±%.3f (leak %.3f) H(T)=%.3f±%.3f (leak %.3f) over %d trials",
        mean_i,
        ci_i,
        result.leak_initiator,
        mean_t,
        ci_t,
        result.leak_target,
        count,
    )
    return result


def build_ring(config: AnonymityConfig, rng: np.random.Generator) -> StaticRing:
    """按配置构建静态快照"""
    ring = StaticRing.random(config.n_nodes, config.id_bits, config.effective_fingers, config.successors, rng)
    log.debug("Static ring built: n=%d F=%d S=%d", ring.n, ring.F, ring.S)
    return ring


def dummy_sweep(config: AnonymityConfig) -> List[int]:
    return list(config.k_dummy_sweep) or [config.k_dummy]
