import numpy as np
import pytest

from ringwatch.analysis import PresimTables, presim_fingerprint, presimulate
from ringwatch.analysis.presim import log_bin, position_edges
from ringwatch.utils import PresimError


def test_log_bins():
    assert [log_bin(v) for v in (0, 1, 2, 3, 4, 1023, 1024)] == [0, 1, 2, 2, 3, 10, 11]
    edges = position_edges(100, 8)
    assert edges[0] == 1 and edges[-1] == 101
    assert np.all(np.diff(edges) > 0)


def test_empty_tables_fall_back_to_uniform():
    tables = PresimTables.empty(100, 16, 8, "x")
    weights = tables.gamma_weights(40)
    assert weights.shape == (40,)
    assert np.allclose(weights, 1 / 40)
    assert tables.xi(3) == pytest.approx(tables.xi(9))
    with pytest.raises(PresimError):
        tables.gamma_weights(0)


def test_gamma_weights_follow_counts():
    tables = PresimTables.empty(100, 16, 8, "x")
    for _ in range(50):
        tables.add_gamma(1, 40)
    weights = tables.gamma_weights(40)
    assert weights.sum() == pytest.approx(1.0)
    assert weights[0] > weights[-1]
    tables.add_xi(2)
    tables.add_xi(2)
    tables.add_xi(5)
    assert tables.xi(2) == pytest.approx(2 / 3)
    tables.add_chi(3, 1000)
    assert tables.chi(3, 1000) == pytest.approx(1.0)
    assert tables.chi(2, 1000) == 0.0


def test_presimulation_counts(ring, anon_config):
    tables = presimulate(ring, anon_config, np.random.default_rng(0), lookups=300)
    assert tables.lookups == 300
    assert tables.xi_counts.sum() > 0
    assert tables.gamma_counts.sum() > 0
    assert tables.chi_counts.sum() <= 300
    assert tables.gamma_weights(ring.n - 1).sum() == pytest.approx(1.0)


def test_progress_reports_every_lookup(ring, anon_config):
    seen = []
    presimulate(ring, anon_config, np.random.default_rng(0), lookups=2500, progress=seen.append)
    assert sum(seen) == 2500


def test_save_and_load_with_fingerprint(tmp_path, ring, anon_config):
    tables = presimulate(ring, anon_config, np.random.default_rng(1), lookups=100)
    path = tables.save(tmp_path / "presim.npz")
    loaded = PresimTables.load(path, fingerprint=presim_fingerprint(anon_config))
    assert np.array_equal(loaded.xi_counts, tables.xi_counts)
    assert np.array_equal(loaded.gamma_counts, tables.gamma_counts)
    assert loaded.lookups == 100
    with pytest.raises(PresimError):
        PresimTables.load(path, fingerprint=presim_fingerprint(anon_config, k_dummy=5))
    with pytest.raises(PresimError):
        PresimTables.load(tmp_path / "missing.npz")


def test_fingerprint_tracks_distribution_parameters(anon_config):
    base = presim_fingerprint(anon_config)
    assert base == presim_fingerprint(anon_config.model_copy())
    assert base != presim_fingerprint(anon_config.model_copy(update={"fraction": 0.1}))
    assert base == presim_fingerprint(anon_config.model_copy(update={"trials": 99}))


def test_csv_export(tmp_path):
    tables = PresimTables.empty(50, 16, 4, "x")
    tables.add_xi(1)
    paths = tables.write_csv(tmp_path)
    assert set(paths) == {"xi", "chi", "gamma"}
    assert paths["xi"].read_text(encoding="utf-8").startswith("hops,count,probability")
