import pytest

from ringwatch.config import Config, ConfigManager, config_fingerprint, list_presets
from ringwatch.utils import ConfigError


def test_defaults():
    config = ConfigManager().load()
    assert config.overlay.n_nodes == 1000
    assert config.overlay.fingers == 12
    assert config.anonymity.k_dummy == 6
    assert config.walk_length == 10


def test_user_file_overrides_defaults(write_yaml):
    path = write_yaml("user.yaml", {"overlay": {"n_nodes": 50}, "adversary": {"behaviors": ["bias"]}})
    config = ConfigManager(path).load()
    assert config.overlay.n_nodes == 50
    assert config.overlay.successors == 6
    assert [b.value for b in config.adversary.behaviors] == ["bias"]


def test_unknown_key_is_rejected(write_yaml):
    path = write_yaml("bad.yaml", {"overlay": {"bogus": 1}})
    with pytest.raises(ConfigError) as exc:
        ConfigManager(path).load()
    assert exc.value.key == "overlay.bogus"


def test_cross_field_validation():
    manager = ConfigManager()
    manager.load()
    with pytest.raises(ConfigError):
        manager.update({"overlay": {"id_bits": 8, "fingers": 12}})
    with pytest.raises(ConfigError):
        manager.update({"engine": {"latency_mode": "matrix"}})


def test_includes_merge_and_cycles_fail(write_yaml):
    write_yaml("base.yaml", {"overlay": {"n_nodes": 40, "fingers": 5}})
    child = write_yaml("child.yaml", {"include": "base.yaml", "overlay": {"fingers": 4}})
    config = ConfigManager(child).load()
    assert config.overlay.n_nodes == 40
    assert config.overlay.fingers == 4

    write_yaml("a.yaml", {"include": ["b.yaml"]})
    b = write_yaml("b.yaml", {"include": ["a.yaml"]})
    with pytest.raises(ConfigError, match="Include cycle"):
        ConfigManager(b).load()


@pytest.mark.parametrize("name", list_presets())
def test_presets_load(name):
    config = ConfigManager(preset=name).load()
    assert config.name == name


def test_unknown_preset():
    with pytest.raises(ConfigError) as exc:
        ConfigManager(preset="nope").load()
    assert "entropy_dummies" in exc.value.details["available"]


def test_security_presets_share_the_base_scenario():
    config = ConfigManager(preset="neighbor_bias").load()
    assert config.overlay.n_nodes == 1000
    assert config.adversary.fraction == 0.2
    assert not config.sentinel.finger_surveillance


def test_fingerprint_ignores_seed_and_output():
    a = Config()
    b = Config(engine={"seed": 99}, output={"out_dir": "elsewhere"})
    c = Config(overlay={"n_nodes": 999})
    assert config_fingerprint(a) == config_fingerprint(b)
    assert config_fingerprint(a) != config_fingerprint(c)


def test_export_roundtrip(tmp_path):
    manager = ConfigManager(preset="timing")
    manager.load()
    path = tmp_path / "out" / "exported.yaml"
    manager.export_config(path)
    again = ConfigManager(path).load()
    assert again.anonymity == manager.config.anonymity
