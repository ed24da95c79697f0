from pathlib import Path

import pytest
from ruamel.yaml import YAML

from ringwatch.config import Config
from ringwatch.core import ArtifactWriter, compare_runs, load_manifest, read_csv
from ringwatch.core.artifacts import sha256_file
from ringwatch.utils import ArtifactError, CompareError, ConfigMismatchError


def _run(root: Path, name: str, values, seed: int = 1, n_nodes: int = 1000, extra: bool = False) -> Path:
    config = Config(engine={"seed": seed}, overlay={"n_nodes": n_nodes})
    writer = ArtifactWriter(root / name, config, preset="demo")
    writer.write_csv("metrics.csv", [{"step": i, "value": v} for i, v in enumerate(values)], "metrics")
    if extra:
        writer.write_csv("extra.csv", [{"a": 1}], "extra")
    writer.write_config()
    writer.write_manifest(note="x")
    return writer.out_dir


def test_csv_carries_schema_line(tmp_path):
    writer = ArtifactWriter(tmp_path / "run", Config())
    path = writer.write_csv("rows.csv", [{"a": 1, "b": 0.5, "c": True}], "demo")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "# schema: demo/v1"
    schema, rows = read_csv(path)
    assert schema == "demo/v1"
    assert rows == [{"a": "1", "b": "0.5", "c": "1"}]


def test_manifest_records_hashes_and_provenance(tmp_path):
    run = _run(tmp_path, "a", [1.0, 2.0])
    manifest = load_manifest(run)
    assert manifest["seed"] == 1
    assert manifest["preset"] == "demo"
    assert manifest["notes"] == {"note": "x"}
    assert manifest["files"]["metrics.csv"] == sha256_file(run / "metrics.csv")
    assert set(manifest["versions"]) == {"ringwatch", "python", "numpy", "scipy"}
    with (run / "config.yaml").open(encoding="utf-8") as fh:
        assert YAML(typ="safe").load(fh)["engine"]["seed"] == 1


def test_missing_manifest(tmp_path):
    with pytest.raises(ArtifactError):
        load_manifest(tmp_path)


def test_same_seed_compares_bytes(tmp_path):
    a = _run(tmp_path, "a", [1.0, 2.0, 3.0])
    b = _run(tmp_path, "b", [1.0, 2.0, 3.0])
    report = compare_runs(a, b)
    assert report.mode == "exact"
    assert report.identical
    assert report.compared == ["metrics.csv"]

    c = _run(tmp_path, "c", [1.0, 2.0, 3.5])
    report = compare_runs(a, c)
    assert report.differing == ["metrics.csv"]


def test_different_seeds_compare_confidence_intervals(tmp_path):
    a = _run(tmp_path, "a", [1.0, 2.0, 3.0], seed=1)
    b = _run(tmp_path, "b", [1.1, 2.1, 3.1], seed=2)
    c = _run(tmp_path, "c", [100.0, 101.0, 102.0], seed=3)
    assert compare_runs(a, b).mode == "ci"
    assert compare_runs(a, b).identical
    report = compare_runs(a, c)
    assert report.diffs["metrics.csv"] == ["value"]


def test_tolerance_mode_lists_paths(tmp_path):
    a = _run(tmp_path, "a", [1.0, 2.0])
    b = _run(tmp_path, "b", [1.1, 2.0])
    assert compare_runs(a, b, tolerance=0.5).identical
    report = compare_runs(a, b, tolerance=0.01)
    assert report.mode == "tolerance"
    assert report.diffs["metrics.csv"] == ["root[0]['value']"]


def test_config_mismatch_and_missing_files(tmp_path):
    a = _run(tmp_path, "a", [1.0])
    b = _run(tmp_path, "b", [1.0], n_nodes=500)
    with pytest.raises(ConfigMismatchError):
        compare_runs(a, b)
    c = _run(tmp_path, "c", [1.0], extra=True)
    report = compare_runs(a, c)
    assert report.missing == ["extra.csv"]
    assert not report.identical
    assert "missing: extra.csv" in report.lines()
    with pytest.raises(CompareError):
        compare_runs(a, tmp_path / "nope")
