from pathlib import Path

import pytest
from click.testing import CliRunner

from ringwatch.cli import cli
from ringwatch.config import list_presets
from ringwatch.core import load_manifest, read_csv

TINY = {
    "name": "cli-tiny",
    "engine": {"seed": 5, "horizon_min": 0.5, "metrics_interval_s": 15},
    "overlay": {"n_nodes": 20, "id_bits": 16, "fingers": 5, "successors": 3},
    "adversary": {"fraction": 0.2, "behaviors": ["bias"]},
    "sentinel": {"finger_surveillance": False, "secure_finger_update": False, "dos_defense": False},
    "anonymity": {
        "n_nodes": 64,
        "id_bits": 16,
        "successors": 4,
        "fraction": 0.2,
        "concurrent_rate": 0.05,
        "k_dummy": 1,
        "trials": 3,
        "presim_lookups": 100,
        "subset_cap": 12,
        "subset_samples": 64,
        "timing_trials": 10,
    },
    "display": {"show_progress": False, "show_summary": False},
    "logging": {"file": None},
}


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def tiny(write_yaml) -> str:
    return str(write_yaml("tiny.yaml", TINY))


def _ok(result):
    assert result.exit_code == 0, result.output
    return result


def test_presets_listed(runner):
    result = _ok(runner.invoke(cli, ["presets"]))
    assert result.output.split() == list_presets()


def test_init_exports_preset(runner, tmp_path):
    target = tmp_path / "out.yaml"
    _ok(runner.invoke(cli, ["-p", "timing", "init", "-o", str(target)]))
    assert "timing" in target.read_text(encoding="utf-8")


def test_config_errors_exit_with_code_2(runner, write_yaml):
    bad = write_yaml("bad.yaml", {"overlay": {"bogus": 1}})
    assert runner.invoke(cli, ["-c", str(bad), "presets"]).exit_code == 2
    assert runner.invoke(cli, ["-p", "no-such-preset", "presets"]).exit_code == 2


def test_run_writes_artifacts(runner, tiny, tmp_path):
    out = tmp_path / "run"
    _ok(runner.invoke(cli, ["-q", "-c", tiny, "run", "-o", str(out)]))
    for name in ("metrics.csv", "summary.csv", "bandwidth.csv", "hops.csv", "config.yaml"):
        assert (out / name).exists()
    manifest = load_manifest(out)
    assert manifest["name"] == "cli-tiny"
    assert manifest["notes"]["trace_digest"]
    schema, rows = read_csv(out / "summary.csv")
    assert schema == "summary/v1"
    assert rows[0]["honest_convictions"] == "0"


def test_entropy_reports_desk_scale(runner, tiny, tmp_path):
    out = tmp_path / "entropy"
    _ok(runner.invoke(cli, ["-q", "-c", tiny, "entropy", "-o", str(out), "--trials", "2"]))
    _, rows = read_csv(out / "entropy.csv")
    assert len(rows) == 1
    assert rows[0]["k_dummy"] == "1"
    assert rows[0]["trials"] == "2"
    notes = load_manifest(out)["notes"]
    assert notes["analysis_path"] == "desk-scale"
    assert notes["presim_source"] == {"1": "inline"}


def test_entropy_reuses_presimulated_tables(runner, tiny, tmp_path):
    pre = tmp_path / "presim"
    _ok(runner.invoke(cli, ["-q", "-c", tiny, "presim", "-o", str(pre), "--lookups", "50"]))
    tables = pre / "presim_k1.npz"
    assert tables.exists()
    assert "presim_k1.npz" in load_manifest(pre)["files"]

    out = tmp_path / "entropy"
    _ok(runner.invoke(cli, ["-q", "-c", tiny, "entropy", "-o", str(out), "--presim", str(tables)]))
    assert load_manifest(out)["notes"]["presim_source"] == {"1": str(tables)}


def test_timing_sweeps_delay(runner, tiny, tmp_path):
    out = tmp_path / "timing"
    args = ["-q", "-c", tiny, "timing", "-o", str(out), "--trials", "5"]
    _ok(runner.invoke(cli, args + ["--delay-max-ms", "0", "--delay-max-ms", "50"]))
    _, rows = read_csv(out / "timing.csv")
    assert [r["relay_delay_max_ms"] for r in rows] == ["0", "50"]
    assert all(0.0 <= float(r["error_rate"]) <= 1.0 for r in rows)


def test_compare_identical_and_diverging_runs(runner, tiny, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        _ok(runner.invoke(cli, ["-q", "-c", tiny, "timing", "-o", str(out), "--trials", "5"]))
    result = _ok(runner.invoke(cli, ["compare", str(a), str(b)]))
    assert "runs agree" in result.output

    csv_path = Path(b) / "timing.csv"
    csv_path.write_text(csv_path.read_text(encoding="utf-8") + "\n", encoding="utf-8")
    result = runner.invoke(cli, ["compare", str(a), str(b)])
    assert result.exit_code == 1
    assert "runs diverge" in result.output
