import math

import numpy as np
import pytest

from ringwatch.analysis import timing_attack
from ringwatch.analysis.timing import queries_per_lookup, timing_leak
from ringwatch.config import AnonymityConfig
from ringwatch.core import LatencyModel


def test_leak_formula():
    n, f, a = 10000, 0.2, 0.01
    assert timing_leak(0.0, n, f, a) == pytest.approx(math.log2(n * (1 - f) + n * a * f))
    assert timing_leak(1.0, n, f, a) == 0.0
    assert timing_leak(0.5, n, f, a) == pytest.approx(0.5 * timing_leak(0.0, n, f, a))


def test_queries_per_lookup():
    assert queries_per_lookup(1024, 6) == 11
    assert queries_per_lookup(10000, 0) == 7


def test_noise_free_single_lookup_is_always_matched():
    config = AnonymityConfig(n_nodes=100, concurrent_rate=0.01, fraction=0.5, k_dummy=2, timing_trials=30)
    latency = LatencyModel(jitter=False)
    result = timing_attack(config, latency, np.random.default_rng(0), relay_delay_max_ms=0)
    assert result.error_rate == 0.0
    assert result.leak == pytest.approx(timing_leak(0.0, 100, 0.5, 0.01))


def test_error_rate_and_progress():
    config = AnonymityConfig(n_nodes=1000, concurrent_rate=0.02, fraction=0.3, k_dummy=2)
    seen = []
    result = timing_attack(
        config, LatencyModel(), np.random.default_rng(1), trials=40, relay_delay_max_ms=200, progress=seen.append
    )
    assert 0.0 <= result.error_rate <= 1.0
    assert result.trials == 40 and sum(seen) == 40
    assert result.row()["relay_delay_max_ms"] == 200
