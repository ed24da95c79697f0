import numpy as np
import pytest

from ringwatch.config import EngineConfig, LatencyMode
from ringwatch.core import LatencyModel
from ringwatch.utils import LatencyMatrixError


def test_synthetic_means_are_symmetric_and_seeded():
    model = LatencyModel(seed=9)
    assert model.mean(3, 8) == model.mean(8, 3)
    assert model.mean(3, 8) == LatencyModel(seed=9).mean(3, 8)
    assert model.mean(5, 5) == 0.0
    assert model.mean(3, 8) >= 1.0


def test_jitter_window_is_capped():
    model = LatencyModel(matrix=np.array([[0, 500], [500, 0]]), mode=LatencyMode.MATRIX)
    assert model.jitter_window(0, 1) == 10.0
    quiet = LatencyModel(jitter=False)
    assert quiet.jitter_window(0, 1) == 0.0
    assert quiet.sample(0, 1, np.random.default_rng(0)) == max(1, int(round(quiet.mean(0, 1))))


def test_matrix_hosts_wrap_by_modulo():
    matrix = np.array([[0, 20, 30], [20, 0, 40], [30, 40, 0]], dtype=float)
    model = LatencyModel(mode=LatencyMode.MATRIX, matrix=matrix)
    assert model.mean(1, 5) == 40.0
    # 同一主机映射到下一台
    assert model.mean(0, 3) == 20.0


@pytest.mark.parametrize(
    "matrix",
    [
        np.zeros((1, 1)),
        np.ones((2, 3)),
        np.array([[0, 5], [0, 0]]),
    ],
)
def test_invalid_matrices_are_rejected(matrix):
    with pytest.raises(LatencyMatrixError):
        LatencyModel.validate_matrix(matrix)


def test_matrix_from_csv(tmp_path):
    path = tmp_path / "lat.csv"
    path.write_text("0,12\n15,0\n", encoding="utf-8")
    config = EngineConfig(latency_mode="matrix", latency_matrix=str(path))
    model = LatencyModel.from_config(config)
    assert model.mean(0, 1) == 12.0
    assert model.mean(1, 0) == 15.0
    with pytest.raises(LatencyMatrixError):
        LatencyModel.load_matrix(tmp_path / "missing.csv")
