import itertools

import pytest

from ringwatch.analysis import (
    LookupTranscript,
    QueryRecord,
    build_linkability,
    observe_transcripts,
    query_links,
    view_lookup,
    walk_linkable,
)
from ringwatch.core.observations import SharedIntel

POSITIONS = range(1, 6)


def _components(bad):
    """相距不超过 2 的恶意位置并查集"""
    parent = {p: p for p in bad}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    for p in bad:
        for q in bad:
            if p < q <= p + 2:
                parent[find(p)] = find(q)
    groups = {}
    for p in bad:
        groups.setdefault(find(p), set()).add(p)
    return list(groups.values())


def _reference(bad, anchors):
    observed = 4 in bad or 5 in bad
    comps = _components(bad)

    def reaches_exit(starts):
        return any(comp & starts and any(p >= 4 for p in comp) for comp in comps)

    to_initiator = observed and reaches_exit(set(anchors) & bad)
    to_middle = observed and reaches_exit({1, 2, 3} & bad)
    return observed, to_initiator, to_middle


@pytest.mark.parametrize("pattern", list(itertools.product((False, True), repeat=5)))
def test_chain_rule_agrees_with_union_find(pattern):
    bad = {p for p, b in zip(POSITIONS, pattern) if b}
    query = QueryRecord(lookup=0, relays=(1, 2, 3, 4), queried=5, index=0)
    links = query_links(query, lambda x: x in bad)
    assert (links.observed, links.to_initiator, links.to_middle) == _reference(bad, {1})


def test_walk_relay_anchors_the_chain():
    bad = {3, 4}
    query = QueryRecord(lookup=0, relays=(1, 2, 3, 4), queried=5, index=0)
    assert not query_links(query, lambda x: x in bad).to_initiator
    links = query_links(query, lambda x: x in bad, walk_relays=frozenset({3}))
    assert links.to_initiator and links.knows_middle


def _q(index, relays, queried, dummy=False):
    return QueryRecord(lookup=7, relays=relays, queried=queried, index=index, dummy=dummy)


def test_shared_middle_relay_bridges_queries():
    bad = {30, 40, 50, 60}
    transcript = LookupTranscript(
        lookup=7,
        initiator=1,
        target=99,
        queries=[
            _q(0, (10, 50, 30, 40), 70),
            _q(1, (10, 50, 31, 60), 71),
            _q(2, (10, 50, 32, 33), 72),
        ],
        walk_relays=frozenset({30}),
    )
    view = view_lookup(transcript, lambda x: x in bad)
    assert [q.index for q in view.linkable] == [0, 1]
    assert [q.index for q in view.linkable_to_middle] == [0, 1]
    assert view.initiator_observed
    assert [q.index for q in view.observed] == [0, 1]
    assert not view.target_observed


def test_unbridged_middle_link_stays_unlinked():
    bad = {50, 60}
    transcript = LookupTranscript(
        lookup=7,
        initiator=1,
        target=99,
        queries=[_q(0, (10, 50, 31, 60), 71)],
    )
    view = view_lookup(transcript, lambda x: x in bad)
    assert view.linkable == []
    assert [q.index for q in view.linkable_to_middle] == [0]
    assert view.indexed
    assert not view.initiator_observed


def test_malicious_entry_observes_initiator():
    transcript = LookupTranscript(lookup=7, initiator=1, target=99, queries=[_q(0, (10, 20, 30, 40), 70)])
    view = view_lookup(transcript, lambda x: x == 10)
    assert view.initiator_observed and view.indexed
    assert view.observed == []


def test_walk_prefix_rule():
    bad = {2, 3, 5}
    assert walk_linkable([2, 3, 4, 5], lambda x: x in bad) == (True, {2, 3})
    assert walk_linkable([4, 2, 3], lambda x: x in bad) == (False, set())


def test_graph_summaries():
    bad = {10, 30, 40, 99}
    views = [
        LookupTranscript(lookup=k, initiator=1, target=99, queries=[QueryRecord(k, (10, 20, 30, 40), 70, 0)])
        for k in range(2)
    ]
    views.append(LookupTranscript(lookup=2, initiator=2, target=98, queries=[QueryRecord(2, (11, 20, 30, 41), 70, 0)]))
    log = observe_transcripts(views, SharedIntel(bad))
    graph = build_linkability(log, views, lambda x: x in bad)
    assert len(graph.with_linkable()) == 2
    assert graph.linked_pairs() == (1, 1)
    assert graph.malicious_targets(lambda x: x in bad) == 1
    assert graph.observed_honest_initiators(lambda x: x in bad) == 1
    assert len(graph.observed_queries()) == 2


def test_honest_transcripts_leave_an_empty_log():
    views = [LookupTranscript(lookup=0, initiator=1, target=99, queries=[_q(0, (10, 20, 30, 40), 70)])]
    log = observe_transcripts(views, SharedIntel({5, 6}))
    assert len(log) == 0
    view = build_linkability(log, views, lambda x: x in {5, 6}).view(0)
    assert not view.observed and not view.indexed


@pytest.mark.parametrize("pattern", list(itertools.product((False, True), repeat=5)))
def test_log_driven_view_matches_full_knowledge(pattern):
    relays = {1: 10, 2: 20, 3: 30, 4: 40, 5: 70}
    bad = {relays[p] for p, b in zip(POSITIONS, pattern) if b}
    views = [
        LookupTranscript(
            lookup=7,
            initiator=1,
            target=99,
            queries=[_q(0, (10, 20, 30, 40), 70), _q(1, (10, 20, 31, 41), 71, dummy=True)],
        )
    ]
    malicious = bad.__contains__
    from_log = build_linkability(observe_transcripts(views, SharedIntel(bad)), views, malicious).view(7)
    direct = view_lookup(views[0], malicious)
    assert from_log.linkable == direct.linkable
    assert from_log.linkable_to_middle == direct.linkable_to_middle
    assert from_log.observed == direct.observed
    assert (from_log.indexed, from_log.initiator_observed) == (direct.indexed, direct.initiator_observed)
