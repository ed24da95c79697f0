import pytest

from ringwatch.core.ring import IdSpace, clockwise_after, counter_clockwise_before, ground_truth_owner
from ringwatch.utils import RingError


def test_clockwise_distance_wraps():
    space = IdSpace(4)
    assert space.distance(14, 2) == 4
    assert space.distance(2, 14) == 12
    assert space.distance(5, 5) == 0


def test_intervals():
    space = IdSpace(4)
    assert space.in_open(0, 14, 2)
    assert not space.in_open(2, 14, 2)
    assert space.in_half_open(2, 14, 2)
    assert not space.in_half_open(14, 14, 2)
    # a == b
    assert space.in_open(3, 7, 7) and not space.in_open(7, 7, 7)
    assert space.in_half_open(7, 7, 7)


def test_ideal_finger_ids_anchor_high_bits():
    space = IdSpace(4)
    assert space.finger_targets(0, 4) == [1, 2, 4, 8]
    assert space.finger_targets(0, 2) == [4, 8]
    assert space.ideal_finger_id(12, 2, 2) == 4
    with pytest.raises(RingError):
        space.ideal_finger_id(0, 0, 4)
    with pytest.raises(RingError):
        space.ideal_finger_id(0, 3, 2)


@pytest.mark.parametrize(
    "owner,i,expected",
    [(8, 1, 9), (8, 4, 16), (63, 2, 1)],
)
def test_ideal_finger_id_full_table(owner, i, expected):
    # F == m：偏移即 2^{i-1}
    assert IdSpace(6).ideal_finger_id(owner, i, 6) == expected


def test_ground_truth_owner():
    alive = [2, 7, 12]
    assert ground_truth_owner(5, alive) == 7
    assert ground_truth_owner(7, alive) == 7
    assert ground_truth_owner(13, alive) == 2
    with pytest.raises(RingError):
        ground_truth_owner(1, [])


def test_neighbors_stop_before_wrapping_onto_self():
    alive = [2, 7, 12]
    assert clockwise_after(7, alive, 5) == [12, 2]
    assert counter_clockwise_before(7, alive, 2) == [2, 12]
    assert clockwise_after(3, alive, 2) == [7, 12]
    assert clockwise_after(3, [], 2) == []
