import numpy as np
import pytest

from ringwatch.analysis import QueryRecord, filter_subsets, range_estimate
from ringwatch.analysis.range_estimation import single_query_range
from ringwatch.core.anonpath import EnvelopeKind, schedule_dummies
from ringwatch.utils import AnalysisError


def _lookups(ring, count=150, min_hops=1):
    rng = np.random.default_rng(3)
    out = []
    for _ in range(count):
        initiator = int(rng.integers(ring.n))
        trace = ring.trace(initiator, int(rng.integers(0, ring.space.size)))
        if trace.hop_count >= min_hops:
            out.append(trace)
    return out


def test_range_contains_true_target(ring):
    traces = _lookups(ring)
    assert traces
    for trace in traces:
        est = range_estimate(ring, trace.queried)
        assert est.contains(trace.target, ring.n)
        assert est.lower == trace.queried[-1]
        assert est.weights.sum() == pytest.approx(1.0)
        assert len(est.nodes(ring.n)) == est.size


def test_range_excludes_the_queried_nodes(ring):
    for trace in _lookups(ring, min_hops=2):
        est = range_estimate(ring, trace.queried)
        assert not any(est.contains(q, ring.n) for q in trace.queried)


def test_single_query_range_excludes_only_the_queried_node(ring):
    est = single_query_range(ring, 10)
    assert est.size == ring.n - 1
    assert est.upper == 9
    assert not est.contains(10, ring.n)
    assert est.contains(9, ring.n) and est.contains(11, ring.n)
    assert est.location(11, ring.n) == 1


def test_invalid_query_orders(ring):
    with pytest.raises(AnalysisError):
        range_estimate(ring, [])
    with pytest.raises(AnalysisError):
        range_estimate(ring, [12, 12])


def _records(trace, dummies, rng):
    """按随机排布在真查询之间插入伪查询"""
    true_iter = iter(trace.queried)
    out = []
    for index, kind in enumerate(schedule_dummies(trace.hop_count, dummies, rng)):
        dummy = kind is EnvelopeKind.DUMMY
        node = int(rng.integers(0, 64)) if dummy else next(true_iter)
        out.append(QueryRecord(lookup=0, relays=(0, 0, 0, 0), queried=node, index=index, dummy=dummy))
    return out


def test_true_subset_passes_the_filter(ring):
    rng = np.random.default_rng(5)
    for trace in _lookups(ring, 60, min_hops=2):
        records = _records(trace, 3, rng)
        truth = tuple(q for q in records if not q.dummy)
        for indexed in (False, True):
            result = filter_subsets(ring, records, reference=trace.initiator, indexed=indexed)
            assert not result.sampled
            assert truth in result.subsets
            assert () not in result.subsets


def test_subsets_respect_send_order(ring):
    trace = _lookups(ring, min_hops=2)[0]
    records = [QueryRecord(0, (0, 0, 0, 0), q, k) for k, q in enumerate(trace.queried)]
    backwards = [QueryRecord(0, (0, 0, 0, 0), q, k) for k, q in enumerate(reversed(trace.queried))]
    result = filter_subsets(ring, records, reference=trace.initiator)
    assert tuple(records) in result.subsets
    reversed_result = filter_subsets(ring, backwards, reference=trace.initiator)
    assert all(len(s) == 1 for s in reversed_result.subsets)


def test_empty_input_and_sampling(ring):
    assert filter_subsets(ring, []).subsets == [()]
    trace = _lookups(ring, min_hops=2)[0]
    records = [QueryRecord(0, (0, 0, 0, 0), q, k) for k, q in enumerate(trace.queried)]
    result = filter_subsets(ring, records, cap=1, samples=64, rng=np.random.default_rng(0))
    assert result.sampled
    assert {s[0] for s in result.subsets if len(s) == 1} == set(records)


def _record(node, index):
    return QueryRecord(0, (0, 0, 0, 0), node, index)


def _gap_node(ring, trace):
    """发起者视角下位于首尾查询之间、却不在虚拟路径上的节点"""
    first, last = trace.queried[0], trace.queried[-1]
    path = set(ring.virtual_path(first, last))
    lo, hi = ring.dist(trace.initiator, first), ring.dist(trace.initiator, last)
    for n in range(ring.n):
        if n not in path and lo < ring.dist(trace.initiator, n) < hi:
            return n
    return None


def test_members_off_the_virtual_path_are_filtered(ring):
    trace, off = next((t, n) for t in _lookups(ring, min_hops=3) for n in [_gap_node(ring, t)] if n is not None)
    first, last = trace.queried[0], trace.queried[-1]
    records = [_record(first, 0), _record(off, 1), _record(last, 2)]
    result = filter_subsets(ring, records, reference=trace.initiator)
    assert (records[0], records[2]) in result.subsets
    assert tuple(records) not in result.subsets


def test_indexed_filter_caps_hops_between_members(ring):
    trace = next(t for t in _lookups(ring, min_hops=3) if ring.hops(t.queried[0], t.queried[-1]) >= 2)
    pair = (_record(trace.queried[0], 0), _record(trace.queried[-1], 1))
    # 序号相邻却隔了两跳以上
    assert pair in filter_subsets(ring, pair, reference=trace.initiator).subsets
    assert pair not in filter_subsets(ring, pair, reference=trace.initiator, indexed=True).subsets
