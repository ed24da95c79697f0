import numpy as np
import pytest

from ringwatch.core import Engine, LatencyModel, RngStreams
from ringwatch.utils import ScheduleError


@pytest.fixture
def engine() -> Engine:
    return Engine(LatencyModel(jitter=False), np.random.default_rng(0), record_trace=True)


def test_same_time_events_run_in_schedule_order(engine):
    seen = []
    for tag in "abc":
        engine.at(100, lambda tag=tag: seen.append(tag))
    engine.at(50, lambda: seen.append("early"))
    engine.run_until(100)
    assert seen == ["early", "a", "b", "c"]


def test_run_until_advances_clock_and_keeps_future_events(engine):
    fired = []
    engine.at(500, lambda: fired.append(engine.now))
    assert engine.run_until(200) == 0
    assert engine.now == 200
    assert engine.pending == 1
    engine.run_for(400)
    assert fired == [500]
    assert engine.now == 600


def test_scheduling_in_the_past_is_rejected(engine):
    engine.run_until(1000)
    with pytest.raises(ScheduleError):
        engine.at(999, lambda: None)


def test_cancelled_event_is_skipped(engine):
    fired = []
    event = engine.at(10, lambda: fired.append(1))
    event.cancel()
    engine.run_until(20)
    assert fired == []


def test_departed_owner_suppresses_timer():
    alive = {1}
    eng = Engine(LatencyModel(jitter=False), np.random.default_rng(0), alive=lambda n: n in alive)
    fired = []
    eng.at(10, lambda: fired.append(1), owner=1)
    eng.at(10, lambda: fired.append(2), owner=2)
    eng.run_until(10)
    assert fired == [1]


def test_rpc_reply_and_timeout(engine):
    replies, timeouts = [], []
    engine.rpc(1, 2, lambda: "pong", replies.append, lambda: timeouts.append(engine.now))
    engine.rpc(1, 3, lambda: None, replies.append, lambda: timeouts.append(engine.now), timeout_ms=5000)
    engine.run_until(10_000)
    assert replies == ["pong"]
    assert timeouts == [5000]


def test_recurring_timer(engine):
    ticks = []
    timer = engine.every(100, lambda: ticks.append(engine.now))
    engine.run_until(350)
    timer.stop()
    engine.run_until(1000)
    assert ticks == [100, 200, 300]


def test_trace_digest_is_deterministic():
    def run() -> str:
        eng = Engine(LatencyModel(seed=4), RngStreams(4)["latency"], record_trace=True)
        for k in range(20):
            eng.send(k, k + 1, None, lambda _: None)
        eng.run_until(60_000)
        return eng.trace_digest()

    assert run() == run()


def test_rng_streams_are_independent_of_creation_order():
    a = RngStreams(11)
    a["ids"].random(5)
    b = RngStreams(11)
    assert a["keys"].random() == b["keys"].random()
    assert RngStreams(11)["ids"].random() != RngStreams(11)["keys"].random()
    assert RngStreams(11).spawn(0).seed != RngStreams(11).spawn(1).seed
