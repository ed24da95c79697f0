"""
标识环运算模块

所有距离计算都在这里完成：顺时针距离、区间判断、理想指针 ID 以及
基于有序存活列表的真实归属（ground truth）查询。
"""
from bisect import bisect_left, bisect_right
from typing import List, Sequence

from ..utils.exceptions import RingError


class IdSpace:
    """2^m 标识环"""

    __slots__ = ("bits", "size")

    def __init__(self, bits: int):
        if bits < 1:
            raise RingError(f"Ring bit-width must be positive, got {bits}")
        self.bits = bits
        self.size = 1 << bits

    def distance(self, a: int, b: int) -> int:
        """从 a 到 b 的顺时针距离"""
        return (b - a) % self.size

    def in_open(self, x: int, a: int, b: int) -> bool:
        """x ∈ (a, b)；a == b 时表示除 a 以外的整个环"""
        if a == b:
            return x != a
        return 0 < (x - a) % self.size < (b - a) % self.size

    def in_half_open(self, x: int, a: int, b: int) -> bool:
        """x ∈ (a, b]；a == b 时表示整个环"""
        if a == b:
            return True
        return 0 < (x - a) % self.size <= (b - a) % self.size

    def ideal_finger_id(self, owner: int, i: int, fingers: int) -> int:
        """第 i 个指针（1..F）的理想 ID

        指针锚定在环的高位：第 i 个指针指向 owner + 2^{(m-F)+i-1}。
        F == m 时即 owner + 2^{i-1}。

        Args:
            owner: 表的所有者
            i: 指针序号，从 1 开始
            fingers: 指针表大小 F

        Returns:
            int: 环上的理想位置

        Raises:
            RingError: 序号越界
        """
        if not 1 <= i <= fingers or fingers > self.bits:
            raise RingError(f"Finger index {i} out of range 1..{fingers}")
        shift = self.bits - fingers
        return (owner + (1 << (shift + i - 1))) % self.size

    def finger_targets(self, owner: int, fingers: int) -> List[int]:
        return [self.ideal_finger_id(owner, i, fingers) for i in range(1, fingers + 1)]


def ground_truth_owner(v: int, alive: Sequence[int]) -> int:
    """v 处或其顺时针之后的第一个存活节点

    Args:
        v: 环上的位置
        alive: 升序排列的存活节点 ID

    Raises:
        RingError: 存活集合为空
    """
    if not alive:
        raise RingError("Cannot resolve an owner in an empty ring")
    idx = bisect_left(alive, v)
    return alive[idx % len(alive)]


def clockwise_after(x: int, alive: Sequence[int], k: int) -> List[int]:
    """x 之后（不含 x）顺时针的前 k 个节点"""
    n = len(alive)
    if n == 0:
        return []
    start = bisect_right(alive, x)
    out: List[int] = []
    for j in range(min(k, n)):
        node = alive[(start + j) % n]
        if node == x:
            break
        out.append(node)
    return out


def counter_clockwise_before(x: int, alive: Sequence[int], k: int) -> List[int]:
    """x 之前（不含 x）逆时针的前 k 个节点"""
    n = len(alive)
    if n == 0:
        return []
    start = bisect_left(alive, x) - 1
    out: List[int] = []
    for j in range(min(k, n)):
        node = alive[(start - j) % n]
        if node == x:
            break
        out.append(node)
    return out
