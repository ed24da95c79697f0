import math
from itertools import count

import numpy as np

from ringwatch.core import Engine, LatencyModel
from ringwatch.core.churn import ChurnModel, ChurnProcess


def _process(model: ChurnModel, n_nodes: int):
    engine = Engine(LatencyModel(jitter=False), np.random.default_rng(0))
    ids = count(n_nodes)

    def arrive(_departed: int) -> int:
        node = next(ids)
        process.register(node)
        return node

    process = ChurnProcess(model, engine, np.random.default_rng(11), on_depart=lambda node: True, on_arrive=arrive)
    for node in range(n_nodes):
        process.register(node)
    process.start()
    return engine, process


def test_static_network_never_churns():
    engine, process = _process(ChurnModel(), 50)
    engine.run_until(3_600_000)
    assert process.total_departures == 0
    assert process.lifetimes == []


def test_departures_match_renewal_expectation():
    n, lam, horizon = 1000, 10.0, 60.0
    engine, process = _process(ChurnModel(mean_lifetime_min=lam), n)
    engine.run_until(int(horizon * 60_000))
    expected = n * horizon / lam
    # 带补充的指数寿命：每个位置是速率 1/λ 的泊松过程
    assert abs(process.total_departures - expected) <= 3 * math.sqrt(expected)
    assert process.total_arrivals == process.total_departures


def test_lifetimes_are_exponential_with_mean_lambda():
    model = ChurnModel(mean_lifetime_min=10.0)
    rng = np.random.default_rng(4)
    samples = [model.sample_lifetime_ms(rng) for _ in range(20_000)]
    assert abs(np.mean(samples) / model.mean_lifetime_ms - 1.0) < 0.05


def test_refused_departure_is_not_counted():
    engine = Engine(LatencyModel(jitter=False), np.random.default_rng(0))
    process = ChurnProcess(
        ChurnModel(mean_lifetime_min=0.01, rejoin=False),
        engine,
        np.random.default_rng(1),
        on_depart=lambda node: node != 0,
        on_arrive=lambda node: node,
    )
    for node in range(3):
        process.register(node)
    process.start()
    engine.run_until(600_000)
    assert process.total_departures == 2
    assert process.total_arrivals == 0
