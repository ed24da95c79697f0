import numpy as np
import pytest

from ringwatch.analysis import StaticRing, exact_initiator_posterior, exact_target_posterior, link_probability, range_estimate
from ringwatch.analysis.oracle import key_share, observation_likelihood
from ringwatch.utils import AnalysisError


@pytest.fixture
def toy() -> StaticRing:
    return StaticRing(np.array([3, 40, 90, 130, 170, 220]), 8, 3, 2)


def _lookup_with_hops(toy):
    for initiator in range(toy.n):
        for key in range(toy.space.size):
            trace = toy.trace(initiator, key)
            if trace.hop_count >= 1:
                return trace
    raise AssertionError("toy ring never routes through an intermediate node")


def test_link_probability_extremes():
    assert link_probability(0.0) == 0.0
    assert link_probability(1.0) == pytest.approx(1.0)
    assert 0.0 < link_probability(0.2) < link_probability(0.4) < 1.0


def test_key_shares_cover_the_space(toy):
    assert key_share(toy).sum() == pytest.approx(1.0)


def test_likelihood_with_certain_links(toy):
    trace = _lookup_with_hops(toy)
    linked = frozenset(trace.queried)
    assert observation_likelihood(toy, trace.initiator, trace.key, linked, 1.0) == pytest.approx(1.0)
    assert observation_likelihood(toy, trace.initiator, trace.key, frozenset(), 1.0) == 0.0


def test_exact_target_support_lies_in_estimated_range(toy):
    trace = _lookup_with_hops(toy)
    post = exact_target_posterior(toy, trace.initiator, frozenset(trace.queried), 1.0)
    assert post.sum() == pytest.approx(1.0)
    assert post[trace.target] > 0
    est = range_estimate(toy, trace.queried)
    for node in np.flatnonzero(post > 0):
        assert est.contains(int(node), toy.n)


def test_exact_target_posterior_with_dummies(toy):
    trace = _lookup_with_hops(toy)
    post = exact_target_posterior(toy, trace.initiator, frozenset(trace.queried), 0.5, k_dummy=1)
    assert post.sum() == pytest.approx(1.0)
    assert np.all(post >= 0)


def test_exact_initiator_posterior_is_normalised(toy):
    trace = _lookup_with_hops(toy)
    post = exact_initiator_posterior(
        toy,
        {0: frozenset(trace.queried), 1: frozenset()},
        trace.target,
        honest=[0, 1, 2],
        p=0.5,
    )
    assert sum(post.values()) == pytest.approx(1.0)
    assert set(post) == {0, 1}


def test_oracle_refuses_large_rings(ring):
    with pytest.raises(AnalysisError):
        exact_target_posterior(ring, 0, frozenset(), 0.5)
