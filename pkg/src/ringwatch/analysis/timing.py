"""
时序分析攻击

恶意入口中继 A 与恶意出口中继 D 同时出现在一次查询路径上时，A 记下发送与收到应答的时刻，
所有恶意 D 记下转发的时刻。攻击者挑选使上行与下行耗时最接近的那次 D 传输，
认定它属于 A 上的这次查询。中间中继 B 在两个方向上各施加 [0, D_max] 的均匀随机延迟。
"""
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from ..config import AnonymityConfig
from ..core.latency import LatencyModel
from ..utils import log

ProgressFn = Callable[[int], None]
UP_HOPS = 3


@dataclass
class TimingResult:
    """时序攻击的统计结果"""
    n_nodes: int
    fraction: float
    concurrent_rate: float
    relay_delay_max_ms: int
    trials: int
    error_rate: float
    leak: float

    def row(self) -> Dict[str, Any]:
        return asdict(self)


def queries_per_lookup(n: int, k_dummy: int) -> int:
    """每次查找的传输数：平均跳数 ceil(log2(N)/2) 加伪查询"""
    return max(1, math.ceil(math.log2(max(2, n)) / 2)) + k_dummy


def timing_leak(error_rate: float, n: int, f: float, a: float) -> float:
    """攻击成功时把发起者缩小到单个节点，失败时落在全部候选中"""
    return (1 - error_rate) * math.log2(max(1.0, n * (1 - f) + n * a * f))


def _one_trial(
    latency: LatencyModel,
    transmissions: int,
    per_lookup: int,
    window_ms: float,
    f: float,
    d_max: float,
    rng: np.random.Generator,
) -> bool:
    """返回攻击者是否把 A 上的传输 0 匹配到了正确的 D 传输"""
    send = rng.random(transmissions) * window_ms
    lookup_of = np.arange(transmissions) // per_lookup
    bad_d = rng.random(transmissions) < f
    bad_d[0] = True

    means = latency.pair_means(rng, transmissions * (UP_HOPS + 1)).reshape(transmissions, UP_HOPS + 1)
    windows = latency.jitter_windows(means)
    up_jitter = rng.random(means.shape) * windows
    down_jitter = rng.random(means.shape) * windows
    up = (means[:, :UP_HOPS] + up_jitter[:, :UP_HOPS]).sum(axis=1) + rng.random(transmissions) * d_max
    down = (means[:, :UP_HOPS] + down_jitter[:, :UP_HOPS]).sum(axis=1) + rng.random(transmissions) * d_max
    service = 2 * means[:, UP_HOPS] + up_jitter[:, UP_HOPS] + down_jitter[:, UP_HOPS]

    d_recv = send + up
    d_send = d_recv + service
    a_recv = d_send + down

    cands = np.flatnonzero(bad_d)
    up_est = d_recv[cands] - send[0]
    down_est = a_recv[0] - d_send[cands]
    causal = (up_est > 0) & (down_est > 0)
    if not causal.any():
        return False
    score = np.where(causal, np.abs(up_est - down_est), np.inf)
    best = cands[int(np.argmin(score))]
    log.debug("Timing match picked transmission %d of lookup %d", best, lookup_of[best])
    return bool(best == 0)


def timing_attack(
    config: AnonymityConfig,
    latency: LatencyModel,
    rng: np.random.Generator,
    trials: Optional[int] = None,
    relay_delay_max_ms: Optional[int] = None,
    progress: Optional[ProgressFn] = None,
) -> TimingResult:
    """估计时序攻击的错误率与信息泄露

    Args:
        config: 匿名性分析配置（N、f、a、k_dummy、发送窗口）
        latency: 延迟模型
        rng: 随机流
        trials: 试验次数，默认取 config.timing_trials
        relay_delay_max_ms: 覆盖 D_max
        progress: 每完成一次试验回调一次

    Returns:
        TimingResult: 错误率与泄露
    """
    count = config.timing_trials if trials is None else trials
    d_max = config.relay_delay_max_ms if relay_delay_max_ms is None else relay_delay_max_ms
    n, f, a = config.n_nodes, config.fraction, config.concurrent_rate
    per_lookup = queries_per_lookup(n, config.k_dummy)
    transmissions = config.concurrent_lookups * per_lookup
    hits = 0
    for _ in range(count):
        hits += int(_one_trial(latency, transmissions, per_lookup, float(config.timing_window_ms), f, float(d_max), rng))
        if progress:
            progress(1)
    error = 1.0 - hits / count
    result = TimingResult(
        n_nodes=n,
        fraction=f,
        concurrent_rate=a,
        relay_delay_max_ms=int(d_max),
        trials=count,
        error_rate=error,
        leak=timing_leak(error, n, f, a),
    )
    log.info("Timing attack with D_max=%d ms: error=%.4f leak=%.3f bits", d_max, error, result.leak)
    return result
