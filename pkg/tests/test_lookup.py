import pytest

from ringwatch.core import hop_count_stats
from ringwatch.core.lookup import (
    LookupHop,
    LookupRecord,
    LookupStatus,
    closest_preceding,
    resolve_from_successors,
)
from ringwatch.core.ring import IdSpace
from ringwatch.core.routing_table import QueryPurpose, RoutingTable

SPACE = IdSpace(8)


def _record(lookup_id: int, hops: int, status: LookupStatus) -> LookupRecord:
    record = LookupRecord(lookup_id, 10, 100, 0, QueryPurpose.LOOKUP, "lookup", status=status)
    record.hops = [LookupHop(20 + i, RoutingTable(20 + i, (), (), (), i), i) for i in range(hops)]
    return record


def test_hop_count_stats_counts_failures_separately():
    records = [
        _record(0, 0, LookupStatus.SUCCEEDED),
        _record(1, 2, LookupStatus.SUCCEEDED),
        _record(2, 2, LookupStatus.BIASED),
        _record(3, 1, LookupStatus.FAILED),
    ]
    stats = hop_count_stats(records)
    assert stats.histogram == {0: 1, 2: 2}
    assert stats.failures == 1
    assert stats.total == 4
    assert stats.mean == pytest.approx(4 / 3)


def test_hop_count_stats_all_failed():
    stats = hop_count_stats([_record(0, 3, LookupStatus.FAILED), _record(1, 1, LookupStatus.FAILED)])
    assert stats.histogram == {}
    assert stats.failures == 2
    assert stats.mean == 0.0


@pytest.mark.parametrize(
    "candidates,at,key,expected",
    [
        ([10, 40, 90, 200], 5, 100, 90),
        ([10, 40, 90, 200], 5, 30, 10),
        ([10, 40], 50, 60, None),
        ([250, 10, 100], 200, 20, 10),
    ],
)
def test_closest_preceding(candidates, at, key, expected):
    assert closest_preceding(SPACE, candidates, at, key) == expected


@pytest.mark.parametrize("key,expected", [(30, 40), (20, 20), (10, 10), (50, None)])
def test_resolve_from_successors(key, expected):
    assert resolve_from_successors(SPACE, 10, (20, 40), key) == expected
