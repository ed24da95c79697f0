"""
攻击者模块

恶意节点在启用的行为之外完全遵守协议。所有篡改后的表仍由恶意节点自己签名。
"""
from bisect import bisect_left, insort
from dataclasses import replace
from enum import Enum
from typing import Callable, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import AdversaryConfig, Behavior
from .observations import SharedIntel
from .rng import choice
from .ring import IdSpace
from .routing_table import QueryPurpose, RoutingTable, Tamper, merge_ordered

LOOKUP_PURPOSES = (QueryPurpose.LOOKUP, QueryPurpose.DIRECT_LOOKUP)


class DropStrategy(str, Enum):
    """丢包者对回执的处理方式"""
    WITHHOLD = "withhold"
    WITNESS_ONLY = "witness_only"


class Adversary:
    """合谋攻击者

    Args:
        config: 攻击者配置
        space: 标识环
        successors: 列表长度 S
        fingers: 指针表大小 F
        rng: adversary 随机流
        intel: 共享信息通道
        clock: 当前虚拟时间
    """

    def __init__(
        self,
        config: AdversaryConfig,
        space: IdSpace,
        successors: int,
        fingers: int,
        rng: np.random.Generator,
        intel: SharedIntel,
        clock: Callable[[], int],
    ):
        self.config = config
        self.behaviors: FrozenSet[Behavior] = frozenset(config.behaviors)
        self.space = space
        self.successors = successors
        self.fingers = fingers
        self.rng = rng
        self.intel = intel
        self.clock = clock
        self.colluders: List[int] = []

    @property
    def malicious(self) -> set:
        return self.intel.malicious

    @property
    def misbehaving(self) -> bool:
        """是否启用了被动观测以外的行为"""
        return bool(self.behaviors - {Behavior.PASSIVE_OBSERVE})

    def enabled(self, behavior: Behavior) -> bool:
        return behavior in self.behaviors

    def is_malicious(self, node: int) -> bool:
        return node in self.intel.malicious

    def add(self, node: int) -> None:
        """登记一个存活的恶意节点"""
        self.intel.malicious.add(node)
        idx = bisect_left(self.colluders, node)
        if idx == len(self.colluders) or self.colluders[idx] != node:
            insort(self.colluders, node)

    def remove(self, node: int) -> None:
        """恶意节点离开或被吊销（仍保留在恶意成员表中）"""
        idx = bisect_left(self.colluders, node)
        if idx < len(self.colluders) and self.colluders[idx] == node:
            del self.colluders[idx]

    def _fires(self, rate: float) -> bool:
        if rate <= 0.0:
            return False
        return self.rng.random() < rate

    def nearest_clockwise(self, point: int, exclude: Iterable[int] = ()) -> Optional[int]:
        """point 处或其顺时针之后最近的合谋节点"""
        cols = self.colluders
        n = len(cols)
        if n == 0:
            return None
        skip = set(exclude)
        start = bisect_left(cols, point)
        for j in range(n):
            node = cols[(start + j) % n]
            if node not in skip:
                return node
        return None

    def nearest_counter_clockwise(self, point: int, k: int, exclude: Iterable[int] = ()) -> List[int]:
        """point 之前（不含 point）逆时针最近的 k 个合谋节点"""
        cols = self.colluders
        n = len(cols)
        skip = set(exclude)
        skip.add(point)
        out: List[int] = []
        start = bisect_left(cols, point) - 1
        for j in range(n):
            node = cols[(start - j) % n]
            if node not in skip:
                out.append(node)
                if len(out) == k:
                    break
        return out

    def clockwise_colluders(self, point: int, k: int) -> List[int]:
        """point 之后（不含 point）顺时针最近的 k 个合谋节点"""
        cols = self.colluders
        n = len(cols)
        out: List[int] = []
        start = bisect_left(cols, point)
        for j in range(n):
            node = cols[(start + j) % n]
            if node != point:
                out.append(node)
                if len(out) == k:
                    break
        return out

    def bias_successor_list(self, owner: int, successors: Sequence[int]) -> Tuple[int, ...]:
        """以 attack_rate 的概率把诚实后继替换为其顺时针最近的合谋节点"""
        if not self._fires(self.config.attack_rate):
            return tuple(successors)
        used = {owner}
        out: List[int] = []
        for node in successors:
            if node in self.intel.malicious:
                out.append(node)
                used.add(node)
                continue
            sub = self.nearest_clockwise(node, exclude=used)
            if sub is None:
                out.append(node)
            else:
                out.append(sub)
                used.add(sub)
        return merge_ordered(self.space, owner, out, len(successors))

    def misdirect_fingers(self, owner: int, fingers: Sequence[int]) -> Tuple[int, ...]:
        """以 attack_rate 的概率把诚实指针替换为距理想 ID 顺时针最近的合谋节点"""
        if not self._fires(self.config.attack_rate):
            return tuple(fingers)
        out: List[int] = []
        for i, node in enumerate(fingers, start=1):
            if node in self.intel.malicious:
                out.append(node)
                continue
            target = self.space.ideal_finger_id(owner, i, len(fingers))
            sub = self.nearest_clockwise(target, exclude=(owner,))
            out.append(node if sub is None else sub)
        return tuple(out)

    def pollute_during_stabilization(self, owner: int, successors: Sequence[int]) -> Tuple[int, ...]:
        """以 succ_manip_rate 的概率从稳定化应答中去掉一个诚实受害者"""
        honest = [n for n in successors if n not in self.intel.malicious]
        if not honest or not self._fires(self.config.succ_manip_rate):
            return tuple(successors)
        victim = choice(self.rng, honest)
        return tuple(n for n in successors if n != victim)

    def consistent_collusion_view(self, owner: int, predecessors: Sequence[int]) -> Tuple[int, ...]:
        """指针检查时返回全部由合谋节点组成的前驱列表，并登记掩护信息"""
        fake = self.nearest_counter_clockwise(owner, self.successors)
        if not fake:
            return tuple(predecessors)
        window_ms = int(self.config.cover_window_s * 1000)
        self.intel.register_cover(fake, owner, self.clock() + window_ms)
        return tuple(fake)

    def cover_successors(self, owner: int) -> Tuple[int, ...]:
        """掩护应答：只列出顺时针方向的合谋节点"""
        return tuple(self.clockwise_colluders(owner, self.successors))

    def respond(self, owner: int, table: RoutingTable, purpose: QueryPurpose) -> RoutingTable:
        """按启用的行为改写即将签名发出的路由表"""
        if not self.behaviors:
            return table
        b = self.behaviors
        fingers, successors, predecessors = table.fingers, table.successors, table.predecessors
        tamper = Tamper.NONE

        if purpose is QueryPurpose.STABILIZE_SUCC:
            if Behavior.POLLUTE_SUCCESSORS in b:
                successors = self.pollute_during_stabilization(owner, successors)
        elif purpose is QueryPurpose.PREDECESSOR_REQUEST:
            if Behavior.MISDIRECT in b or Behavior.POLLUTE_FINGERS in b:
                predecessors = self.consistent_collusion_view(owner, predecessors)
        elif purpose in LOOKUP_PURPOSES:
            covering = Behavior.MISDIRECT in b or Behavior.POLLUTE_FINGERS in b
            if (
                covering
                and self.intel.covering(owner, table.timestamp) is not None
                and self._fires(self.config.succ_manip_rate)
            ):
                successors = self.cover_successors(owner) or successors
            elif Behavior.BIAS in b or (
                Behavior.POLLUTE_FINGERS in b and purpose is QueryPurpose.DIRECT_LOOKUP
            ):
                successors = self.bias_successor_list(owner, successors)
            if Behavior.MISDIRECT in b:
                fingers = self.misdirect_fingers(owner, fingers)

        if successors != table.successors:
            tamper |= Tamper.SUCCESSORS
        if fingers != table.fingers:
            tamper |= Tamper.FINGERS
        if predecessors != table.predecessors:
            tamper |= Tamper.PREDECESSORS
        if tamper == Tamper.NONE:
            return table
        return replace(table, fingers=fingers, successors=successors, predecessors=predecessors, tamper=tamper)

    def selective_drop(self, path: Sequence[int]) -> Optional[int]:
        """选择性丢包：路径首个中继诚实时，第一个作恶的恶意中继丢弃消息

        Args:
            path: [发起者, 中继..., 被查询节点]

        Returns:
            Optional[int]: 丢包中继在 path 中的下标；转发时返回 None
        """
        if Behavior.SELECTIVE_DOS not in self.behaviors or len(path) < 3:
            return None
        if path[1] in self.intel.malicious:
            return None
        for k in range(1, len(path) - 1):
            if path[k] in self.intel.malicious and self._fires(self.config.attack_rate):
                return k
        return None

    def drop_strategy(self) -> DropStrategy:
        if self.rng.random() < 0.5:
            return DropStrategy.WITHHOLD
        return DropStrategy.WITNESS_ONLY

    def bias_walk_choice(self, table: RoutingTable, honest_choice: int) -> Optional[int]:
        """第二阶段游走中伪造一跳：改选指针表中的合谋节点"""
        if Behavior.BIAS_WALK not in self.behaviors or not self._fires(self.config.attack_rate):
            return None
        options = [n for n in table.fingers if n in self.intel.malicious and n != honest_choice]
        if not options:
            return None
        return choice(self.rng, options)
