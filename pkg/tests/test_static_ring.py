import numpy as np
import pytest

from ringwatch.analysis import StaticRing
from ringwatch.analysis.static_ring import PATH_CACHE_SIZE
from ringwatch.utils import RingError


def _keys(ring: StaticRing, count: int = 200):
    rng = np.random.default_rng(1)
    return [int(k) for k in rng.integers(0, ring.space.size, size=count)]


def test_snapshot_shape(ring):
    assert ring.n == 64
    assert ring.fingers.shape == (64, 6)
    assert ring.successors.shape == (64, 4)
    assert np.all(np.diff(ring.ids) > 0)
    assert int(ring.successors[63, 0]) == 0


def test_lookup_resolves_owner_and_progresses(ring):
    for key in _keys(ring):
        trace = ring.trace(5, key)
        assert trace.target == ring.owner(key)
        dists = [ring.key_dist(q, key) for q in trace.queried]
        assert dists == sorted(dists, reverse=True)
        assert trace.target not in trace.queried
        assert trace.hop_count <= 2 * ring.F


def test_virtual_path_matches_lookup_segments(ring):
    for key in _keys(ring, 100):
        queried = ring.trace(11, key).queried
        for i in range(len(queried)):
            for j in range(i + 1, len(queried)):
                assert ring.virtual_path(queried[i], queried[j]) == queried[i : j + 1]


def test_virtual_path_endpoints(ring):
    path = ring.virtual_path(3, 40)
    assert path[0] == 3 and path[-1] == 40
    assert ring.hops(3, 40) == len(path) - 1
    assert ring.virtual_path(9, 9) == (9,)


def test_virtual_paths_are_cached_with_a_bound(ring):
    first = ring.virtual_path(3, 40)
    assert ring.virtual_path(3, 40) is first
    info = ring._path.cache_info()
    assert info.maxsize == PATH_CACHE_SIZE
    assert info.hits >= 1


def test_range_size_counts_half_open_interval(ring):
    assert ring.range_size(10, 15) == 5
    assert ring.range_size(60, 2) == 6
    assert ring.range_size(7, 7) == ring.n


def test_degenerate_snapshots_are_rejected():
    with pytest.raises(RingError):
        StaticRing(np.array([5]), 8, 3, 2)
    with pytest.raises(RingError):
        StaticRing(np.array([1, 2, 3]), 4, 5, 2)
