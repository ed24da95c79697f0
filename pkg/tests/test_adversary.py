import numpy as np
import pytest

from ringwatch.config import AdversaryConfig, Behavior
from ringwatch.core.adversary import Adversary
from ringwatch.core.observations import ObservationClass, SharedIntel
from ringwatch.core.ring import IdSpace
from ringwatch.core.routing_table import QueryPurpose, RoutingTable, Tamper

SPACE = IdSpace(8)
COLLUDERS = (45, 95, 140, 200)


def _adversary(behaviors, attack_rate=1.0, succ_manip_rate=0.5, now=0) -> Adversary:
    config = AdversaryConfig(
        fraction=0.2, attack_rate=attack_rate, succ_manip_rate=succ_manip_rate, behaviors=behaviors
    )
    adv = Adversary(
        config, SPACE, successors=2, fingers=4, rng=np.random.default_rng(5), intel=SharedIntel(), clock=lambda: now
    )
    for node in COLLUDERS:
        adv.add(node)
    return adv


def test_bias_rate_zero_is_truthful():
    adv = _adversary([Behavior.BIAS], attack_rate=0.0)
    assert adv.bias_successor_list(10, (20, 30)) == (20, 30)


def test_bias_rate_one_fills_list_with_colluders():
    adv = _adversary([Behavior.BIAS])
    biased = adv.bias_successor_list(10, (20, 30))
    assert len(biased) == 2
    assert all(adv.is_malicious(n) for n in biased)
    assert biased == (45, 95)


def test_misdirect_rate_zero_is_truthful():
    adv = _adversary([Behavior.MISDIRECT], attack_rate=0.0)
    fingers = (30, 50, 90, 150)
    assert adv.misdirect_fingers(10, fingers) == fingers


def test_misdirect_rate_one_swaps_honest_fingers():
    adv = _adversary([Behavior.MISDIRECT])
    # 理想 ID：26, 42, 74, 138
    misdirected = adv.misdirect_fingers(10, (30, 45, 90, 150))
    assert misdirected == (45, 45, 95, 140)


def test_respond_marks_tampered_sections():
    adv = _adversary([Behavior.BIAS, Behavior.MISDIRECT])
    table = RoutingTable(10, (30, 50, 90, 150), (20, 30), (5, 250), 0)
    out = adv.respond(10, table, QueryPurpose.LOOKUP)
    assert out.tamper & Tamper.SUCCESSORS
    assert out.tamper & Tamper.FINGERS
    assert not out.tamper & Tamper.PREDECESSORS


def test_passive_observer_answers_truthfully():
    adv = _adversary([Behavior.PASSIVE_OBSERVE])
    table = RoutingTable(10, (30, 50, 90, 150), (20, 30), (5, 250), 0)
    for purpose in QueryPurpose:
        assert adv.respond(10, table, purpose) is table


def test_collusion_view_lists_colluders_and_registers_cover():
    adv = _adversary([Behavior.MISDIRECT], now=1000)
    fake = adv.consistent_collusion_view(140, (120, 110))
    assert fake == (95, 45)
    intel = adv.intel
    assert intel.covering(95, 1000) == 140
    assert intel.covering(45, 1000 + 15_000) == 140
    assert intel.covering(95, 1000 + 15_001) is None


def test_covering_colluder_answers_lookup_with_cover_list():
    adv = _adversary([Behavior.MISDIRECT], succ_manip_rate=1.0, now=1000)
    adv.consistent_collusion_view(140, (120, 110))
    table = RoutingTable(95, (100, 120, 160, 230), (100, 120), (80, 60), 1000)
    out = adv.respond(95, table, QueryPurpose.LOOKUP)
    assert out.successors == (140, 200)
    assert out.tamper & Tamper.SUCCESSORS


def test_predecessor_request_gets_collusion_view():
    adv = _adversary([Behavior.POLLUTE_FINGERS])
    table = RoutingTable(140, (), (150, 160), (120, 110), 0)
    out = adv.respond(140, table, QueryPurpose.PREDECESSOR_REQUEST)
    assert out.predecessors == (95, 45)
    assert out.tamper & Tamper.PREDECESSORS


def test_selective_drop_forwards_behind_malicious_entry():
    adv = _adversary([Behavior.SELECTIVE_DOS])
    assert adv.selective_drop((1, 45, 20, 95, 30, 33)) is None


def test_selective_drop_drops_behind_honest_entry():
    adv = _adversary([Behavior.SELECTIVE_DOS])
    # 路径 [发起者, A, B, C, D, E]，C 恶意
    assert adv.selective_drop((1, 20, 30, 95, 110, 33)) == 3


def test_selective_drop_needs_the_behavior():
    adv = _adversary([Behavior.BIAS])
    assert adv.selective_drop((1, 20, 30, 95, 110, 33)) is None


@pytest.mark.parametrize(
    "path,expected",
    [
        ((1, 2, 3, 4, 5, 6), []),
        ((1, 2, 3, 4, 95, 6), [(ObservationClass.RELAY_HOP, (4, 6))]),
        ((1, 2, 3, 4, 5, 95), [(ObservationClass.QUERY_SEEN, (5,))]),
    ],
)
def test_observe_path_records_only_malicious_positions(path, expected):
    intel = SharedIntel(set(COLLUDERS))
    assert intel.observe_path(list(path), 7, token=(0, 1)) == len(expected)
    assert [(obs.cls, obs.endpoints) for obs in intel.log] == expected
    assert all(obs.token == (0, 1) and obs.observer == 95 for obs in intel.log)
