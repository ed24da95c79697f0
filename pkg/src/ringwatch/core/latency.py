"""
延迟模型模块

两种模式：
- matrix: 读取 N×N 单向延迟矩阵（毫秒，CSV，无表头），节点按 ID 对主机数取模映射；
- synthetic: 每对节点一个确定性的对数正态平均延迟（中位数 80 ms，σ = 0.5）。

抖动窗口为 min(10 ms, 平均延迟的 10%)，在窗口内均匀抽取。
"""
import math
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ..config import EngineConfig, LatencyMode
from ..utils.exceptions import LatencyMatrixError


class LatencyModel:
    """成对延迟模型"""

    def __init__(
        self,
        mode: LatencyMode = LatencyMode.SYNTHETIC,
        seed: int = 0,
        median_ms: float = 80.0,
        sigma: float = 0.5,
        matrix: Optional[np.ndarray] = None,
        jitter: bool = True,
        jitter_max_ms: float = 10.0,
        jitter_fraction: float = 0.1,
    ):
        self.mode = mode
        self.seed = seed
        self.median_ms = median_ms
        self.sigma = sigma
        self.jitter = jitter
        self.jitter_max_ms = jitter_max_ms
        self.jitter_fraction = jitter_fraction
        self._cache: Dict[Tuple[int, int], float] = {}
        if mode == LatencyMode.MATRIX:
            if matrix is None:
                raise LatencyMatrixError("Matrix mode requires a latency matrix")
            self.matrix = self.validate_matrix(matrix)
        else:
            self.matrix = None

    @classmethod
    def from_config(cls, config: EngineConfig) -> "LatencyModel":
        matrix = None
        if config.latency_mode == LatencyMode.MATRIX:
            matrix = cls.load_matrix(config.latency_matrix)
        return cls(
            mode=config.latency_mode,
            seed=config.seed,
            median_ms=config.latency_median_ms,
            sigma=config.latency_sigma,
            matrix=matrix,
            jitter=config.jitter,
            jitter_max_ms=config.jitter_max_ms,
            jitter_fraction=config.jitter_fraction,
        )

    @staticmethod
    def validate_matrix(matrix: np.ndarray) -> np.ndarray:
        """校验延迟矩阵：方阵、非对角元素为正"""
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise LatencyMatrixError(f"Latency matrix must be square with >= 2 hosts, got shape {m.shape}")
        off = ~np.eye(m.shape[0], dtype=bool)
        bad = np.argwhere((m <= 0) & off)
        if bad.size:
            u, v = (int(x) for x in bad[0])
            raise LatencyMatrixError(
                f"Latency matrix entry ({u}, {v}) must be positive",
                details={"row": u, "col": v, "value": float(m[u, v])},
            )
        return m.astype(np.float64)

    @classmethod
    def load_matrix(cls, path: Union[str, Path]) -> np.ndarray:
        """从 CSV 加载延迟矩阵

        Raises:
            LatencyMatrixError: 文件不可读或内容不合法
        """
        try:
            data = np.loadtxt(Path(path), delimiter=",", ndmin=2)
        except (OSError, ValueError) as e:
            raise LatencyMatrixError(f"Failed to load latency matrix {path}: {str(e)}")
        return cls.validate_matrix(data)

    def mean(self, u: int, v: int) -> float:
        """u 到 v 的平均单向延迟（毫秒）"""
        if u == v:
            return 0.0
        if self.matrix is not None:
            n = self.matrix.shape[0]
            hu, hv = u % n, v % n
            if hu == hv:
                hv = (hv + 1) % n
            return float(self.matrix[hu, hv])
        key = (u, v) if u < v else (v, u)
        value = self._cache.get(key)
        if value is None:
            z = np.random.default_rng([self.seed, key[0], key[1]]).standard_normal()
            value = max(1.0, self.median_ms * math.exp(self.sigma * z))
            self._cache[key] = value
        return value

    def jitter_window(self, u: int, v: int) -> float:
        if not self.jitter:
            return 0.0
        return min(self.jitter_max_ms, self.jitter_fraction * self.mean(u, v))

    def pair_means(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """为 size 对互不相关的主机抽取平均单向延迟（毫秒）"""
        if self.matrix is not None:
            n = self.matrix.shape[0]
            u = rng.integers(0, n, size=size)
            v = (u + rng.integers(1, n, size=size)) % n
            return self.matrix[u, v]
        z = rng.standard_normal(size)
        return np.maximum(1.0, self.median_ms * np.exp(self.sigma * z))

    def jitter_windows(self, means: np.ndarray) -> np.ndarray:
        if not self.jitter:
            return np.zeros_like(means)
        return np.minimum(self.jitter_max_ms, self.jitter_fraction * means)

    def sample(self, u: int, v: int, rng: np.random.Generator) -> int:
        """抽取一次单向延迟（整数毫秒，u != v 时至少 1）"""
        if u == v:
            return 0
        base = self.mean(u, v)
        window = self.jitter_window(u, v)
        if window > 0:
            base += rng.random() * window
        return max(1, int(round(base)))
