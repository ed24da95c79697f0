"""
统计辅助函数
"""
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import stats


def mean_ci(values: Union[Sequence[float], np.ndarray], level: float = 0.95) -> Tuple[float, float]:
    """均值与 t 分布置信区间半宽

    Args:
        values: 样本
        level: 置信水平

    Returns:
        Tuple[float, float]: (均值, 半宽)；空样本返回 (nan, nan)，单个样本半宽为 0
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    sem = float(stats.sem(arr))
    if sem == 0:
        return mean, 0.0
    return mean, float(sem * stats.t.ppf((1 + level) / 2, arr.size - 1))


def intervals_overlap(a: Tuple[float, float], b: Tuple[float, float]) -> bool:
    """两个 (均值, 半宽) 区间是否相交"""
    return abs(a[0] - b[0]) <= a[1] + b[1]
