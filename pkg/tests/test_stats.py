import math

import pytest

from ringwatch.utils.stats import intervals_overlap, mean_ci


def test_mean_ci_uses_student_t():
    mean, half = mean_ci([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    # t(0.975, 2) / sqrt(3)
    assert half == pytest.approx(4.302653 / math.sqrt(3), rel=1e-5)


def test_mean_ci_degenerate_samples():
    mean, half = mean_ci([])
    assert math.isnan(mean) and math.isnan(half)
    assert mean_ci([4.0]) == (4.0, 0.0)
    assert mean_ci([2.0, 2.0, 2.0]) == (2.0, 0.0)


def test_interval_overlap():
    assert intervals_overlap((1.0, 0.5), (1.8, 0.4))
    assert not intervals_overlap((1.0, 0.1), (2.0, 0.1))
