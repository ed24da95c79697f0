from ringwatch.config import Config
from ringwatch.core import Scenario
from ringwatch.core.sentinel import Mechanism


def _copy(config: Config, **sections) -> Config:
    data = config.model_dump()
    for section, values in sections.items():
        data[section].update(values)
    return Config(**data)


def test_same_seed_replays_identically(tiny_config):
    first = Scenario(tiny_config, record_trace=True).run()
    second = Scenario(tiny_config, record_trace=True).run()
    assert first.trace_digest is not None
    assert first.trace_digest == second.trace_digest
    assert first.summary == second.summary
    assert first.events == second.events


def test_static_network_convicts_no_honest_node(tiny_config):
    result = Scenario(tiny_config).run()
    assert result.summary["honest_convictions"] == 0
    assert result.churn["departures"] == 0
    assert result.metrics


def test_lookups_resolve_and_bandwidth_is_accounted(tiny_config):
    config = _copy(tiny_config, adversary={"fraction": 0.0, "behaviors": []})
    result = Scenario(config).run()
    assert result.hops.total > 0
    assert result.hops.failures == 0
    assert result.hops.mean >= 0
    assert result.summary["convictions"] == 0
    classes = {row["message_class"] for row in result.bandwidth}
    assert {"stabilize", "total"} <= classes


def test_churn_and_full_defenses_run(tiny_config):
    config = _copy(
        tiny_config,
        churn={"mean_lifetime_min": 1.0},
        adversary={"fraction": 0.2, "behaviors": ["bias", "selective_dos"]},
        sentinel={"finger_surveillance": True, "secure_finger_update": True, "dos_defense": True},
        workload={"transport": "anon"},
    )
    result = Scenario(config).run()
    assert result.churn["departures"] > 0
    for key in ("neighbor_tests", "finger_tests", "dos_false_alarm"):
        assert key in result.summary


def test_verdicts_replay_from_archived_proofs(tiny_config):
    config = _copy(
        tiny_config,
        churn={"mean_lifetime_min": 1.0},
        adversary={"fraction": 0.2, "behaviors": ["bias", "misdirect", "pollute_successors", "pollute_fingers"]},
        sentinel={"finger_surveillance": True, "secure_finger_update": True},
    )
    scenario = Scenario(config)
    scenario.run()
    assert len(scenario.ca.reports) == len(scenario.ca.verdicts)
    for report, verdict in zip(scenario.ca.reports, scenario.ca.verdicts):
        replayed = scenario.ca.reverify(report, verdict)
        assert replayed.convicted == verdict.convicted
        assert replayed.chain == verdict.chain
        assert replayed.reason == verdict.reason


def _finger_config(tiny_config, **sentinel):
    return _copy(
        tiny_config,
        engine={"horizon_min": 30, "metrics_interval_s": 60},
        overlay={"n_nodes": 100, "fingers": 8},
        adversary={"fraction": 0.2, "behaviors": ["misdirect"]},
        sentinel={"neighbor_surveillance": False, "dos_defense": False, **sentinel},
    )


def test_finger_mechanisms_keep_false_alarms_low(tiny_config):
    config = _finger_config(tiny_config, finger_surveillance=True, secure_finger_update=True)
    config = _copy(config, engine={"horizon_min": 15}, adversary={"behaviors": ["misdirect", "pollute_fingers"]})
    scenario = Scenario(config)
    result = scenario.run()
    assert result.summary["finger_tests"] > 0
    assert result.summary["finger_false_alarm"] <= 0.04
    assert result.summary["secure_update_false_alarm"] <= 0.04
    assert result.summary["honest_convictions"] == 0
    assert not any(v.reason == "placeholder finger" for v in scenario.ca.verdicts)


def test_finger_surveillance_removes_misdirecting_nodes(tiny_config):
    config = _finger_config(tiny_config, finger_surveillance=True, secure_finger_update=False)
    scenario = Scenario(config)
    result = scenario.run()
    adversary = scenario.overlay.adversary
    remaining = sum(1 for n in scenario.overlay.membership.ids if adversary.is_malicious(n))
    assert scenario.malicious_count > 0
    assert remaining <= 0.25 * scenario.malicious_count
    assert result.summary["honest_convictions"] == 0


def _secure_update_scenario(tiny_config, fraction):
    config = _copy(
        tiny_config,
        overlay={"n_nodes": 60, "fingers": 8},
        adversary={"fraction": fraction, "behaviors": ["misdirect"], "succ_manip_rate": 0.0},
        sentinel={"neighbor_surveillance": False, "secure_finger_update": True},
    )
    scenario = Scenario(config)
    scenario.setup()
    return scenario


def _secure_reports(scenario, node, candidate):
    return [
        r
        for r in scenario.ca.reports
        if r.mechanism is Mechanism.SECURE_UPDATE and r.reporter == node.id and r.claimed_finger == candidate
    ]


def test_secure_update_adopts_honest_candidate(tiny_config):
    scenario = _secure_update_scenario(tiny_config, 0.0)
    ov = scenario.overlay
    node = ov.nodes[ov.membership.ids[0]]
    index = ov.F - 1
    candidate = node.fingers[index]
    node.fingers[index] = node.successors[0]
    resolver = ov.own_signed_table(ov.nodes[node.successors[0]])
    scenario.sentinel.secure_finger_update(node, index, candidate, resolver)
    scenario.engine.run_until(scenario.engine.now + 40_000)
    assert node.fingers[index] == candidate
    assert ov.membership.owner(ov.space.ideal_finger_id(node.id, index + 1, ov.F)) == candidate
    assert _secure_reports(scenario, node, candidate) == []


def test_secure_update_rejects_colluder_and_reports(tiny_config):
    scenario = _secure_update_scenario(tiny_config, 0.2)
    ov = scenario.overlay
    adversary = ov.adversary
    node, index, candidate = next(
        (node, i, colluder)
        for node in ov.nodes.values()
        if not node.malicious
        for i in range(ov.F)
        for target in [ov.space.ideal_finger_id(node.id, i + 1, ov.F)]
        for colluder in [adversary.nearest_clockwise(target, exclude=(node.id,))]
        if colluder is not None and colluder != ov.membership.owner(target)
    )
    before = node.fingers[index]
    resolver = ov.own_signed_table(ov.nodes[node.successors[0]])
    scenario.sentinel.secure_finger_update(node, index, candidate, resolver)
    scenario.engine.run_until(scenario.engine.now + 40_000)
    assert node.fingers[index] == before != candidate
    assert _secure_reports(scenario, node, candidate)
