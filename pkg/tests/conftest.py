"""
测试公共夹具
"""
from pathlib import Path

import numpy as np
import pytest
from ruamel.yaml import YAML

from ringwatch.analysis import StaticRing
from ringwatch.config import AnonymityConfig, Config


@pytest.fixture
def ring() -> StaticRing:
    """64 个节点的小快照"""
    return StaticRing.random(64, 16, 6, 4, np.random.default_rng(7))


@pytest.fixture
def anon_config() -> AnonymityConfig:
    return AnonymityConfig(
        n_nodes=64,
        id_bits=16,
        successors=4,
        fraction=0.3,
        concurrent_rate=0.05,
        k_dummy=2,
        trials=5,
        presim_lookups=200,
        subset_cap=12,
        subset_samples=256,
        timing_trials=20,
    )


@pytest.fixture
def tiny_config() -> Config:
    """几十个节点、几分钟的事件驱动场景"""
    return Config(
        name="tiny",
        engine={"seed": 3, "horizon_min": 2, "metrics_interval_s": 30},
        overlay={"n_nodes": 30, "id_bits": 16, "fingers": 6, "successors": 4},
        adversary={"fraction": 0.2, "behaviors": ["bias"]},
        sentinel={
            "neighbor_surveillance": True,
            "finger_surveillance": False,
            "secure_finger_update": False,
            "dos_defense": False,
        },
        display={"show_progress": False, "show_summary": False},
        logging={"file": None},
    )


@pytest.fixture
def write_yaml(tmp_path: Path):
    """把字典写成 YAML 文件，返回路径"""

    def _write(name: str, data: dict) -> Path:
        path = tmp_path / name
        with path.open("w", encoding="utf-8") as fh:
            YAML(typ="safe").dump(data, fh)
        return path

    return _write
