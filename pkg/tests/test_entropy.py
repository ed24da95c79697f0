import math

import numpy as np
import pytest

from ringwatch.analysis import PresimTables, WorldSampler, h_malicious, measure_trial, presimulate, run_trials, shannon
from ringwatch.analysis.entropy import initiator_posterior


@pytest.fixture
def tables(ring, anon_config):
    return presimulate(ring, anon_config, np.random.default_rng(2), lookups=400)


def test_shannon():
    assert shannon(np.full(8, 1 / 8)) == pytest.approx(3.0)
    assert shannon(np.array([1.0, 0.0])) == 0.0
    assert shannon(np.array([2.0, 2.0])) == pytest.approx(1.0)
    assert shannon(np.zeros(3)) == 0.0


def test_h_malicious():
    n, f = 1024, 0.25
    assert h_malicious(n, f, 4) == pytest.approx(0.75 * math.log2(768) + 0.25 * 2)
    assert h_malicious(n, 0.0, 0) == pytest.approx(10.0)


def test_honest_network_leaks_nothing(ring, anon_config):
    config = anon_config.model_copy(update={"fraction": 0.0})
    tables = PresimTables.empty(ring.n, 16, config.gamma_position_bins, "none")
    result = run_trials(ring, config, tables, np.random.default_rng(0), trials=4)
    assert result.h_initiator == pytest.approx(math.log2(ring.n))
    assert result.h_target == pytest.approx(math.log2(ring.n))
    assert result.leak_initiator == pytest.approx(0.0, abs=1e-9)
    assert result.leak_target == pytest.approx(0.0, abs=1e-9)
    assert result.branches == {"I:target_honest": 4, "T:initiator_hidden": 4}
    assert result.unlinkability == 1.0


def test_entropies_stay_within_bounds(ring, anon_config, tables):
    sampler = WorldSampler(ring, anon_config)
    rng = np.random.default_rng(9)
    h_i_max = math.log2((1 - anon_config.fraction) * ring.n)
    for _ in range(25):
        world = sampler.sample(rng)
        outcome = measure_trial(ring, world, tables, anon_config, rng)
        assert 0.0 <= outcome.h_initiator <= h_i_max + 1e-9
        assert 0.0 <= outcome.h_target <= math.log2(ring.n) + 1e-9
        if outcome.target_branch == "initiator_hidden":
            assert outcome.h_target == pytest.approx(math.log2(ring.n))


def test_initiator_posterior_is_normalised(ring, anon_config, tables):
    sampler = WorldSampler(ring, anon_config.model_copy(update={"fraction": 0.6, "concurrent_rate": 0.2}))
    rng = np.random.default_rng(4)
    for _ in range(20):
        world = sampler.sample(rng)
        graph = world.linkability()
        if graph.with_linkable():
            post = initiator_posterior(ring, graph, world.measured.target, tables)
            assert sum(post.values()) == pytest.approx(1.0)
            assert set(post) <= {t.initiator for t in world.transcripts}
            return
    pytest.fail("no trial produced a linkable query")


def test_trial_summary(ring, anon_config, tables):
    result = run_trials(ring, anon_config, tables, np.random.default_rng(3), trials=6)
    assert result.trials == 6
    assert sum(v for k, v in result.branches.items() if k.startswith("I:")) == 6
    assert result.h_initiator_max == pytest.approx(math.log2(0.7 * ring.n))
    row = result.row()
    assert "unlinkability" in row and "branches" not in row
    assert 0.0 <= row["unlinkability"] <= 1.0
