"""
路由表模块
"""
from dataclasses import dataclass, field, replace
from enum import Enum, IntFlag
from typing import Callable, List, Optional, Sequence, Tuple

from .ring import IdSpace
from .signing import SignatureAuthority, SignatureTag


class QueryPurpose(str, Enum):
    """路由表请求的用途（应答方所见）"""
    LOOKUP = "lookup"
    DIRECT_LOOKUP = "direct_lookup"
    STABILIZE_SUCC = "stabilize_succ"
    STABILIZE_PRED = "stabilize_pred"
    PREDECESSOR_REQUEST = "predecessor_request"
    WALK = "walk"


class Tamper(IntFlag):
    """模拟器内部的篡改标记（不参与签名）"""
    NONE = 0
    SUCCESSORS = 1
    FINGERS = 2
    PREDECESSORS = 4


@dataclass(frozen=True)
class RoutingTable:
    """指针表 + 后继列表 + 前驱列表 + 签名"""
    owner: int
    fingers: Tuple[int, ...]
    successors: Tuple[int, ...]
    predecessors: Tuple[int, ...]
    timestamp: int
    signature: Optional[SignatureTag] = None
    tamper: Tamper = field(default=Tamper.NONE, compare=False)

    @property
    def manipulated(self) -> bool:
        return self.tamper != Tamper.NONE

    @property
    def payload(self) -> bytes:
        """签名覆盖的规范字节串"""
        parts = (
            str(self.owner),
            ",".join(map(str, self.fingers)),
            ",".join(map(str, self.successors)),
            ",".join(map(str, self.predecessors)),
            str(self.timestamp),
        )
        return "|".join(parts).encode("ascii")

    def signed(self, authority: SignatureAuthority) -> "RoutingTable":
        return replace(self, signature=authority.sign(self.owner, self.payload, self.timestamp))

    def verify(self, authority: SignatureAuthority) -> bool:
        sig = self.signature
        if sig is None or sig.signer != self.owner or sig.timestamp != self.timestamp:
            return False
        return authority.verify(sig, self.payload)

    def same_neighbors(self, other: "RoutingTable") -> bool:
        return (
            self.owner == other.owner
            and self.successors == other.successors
            and self.predecessors == other.predecessors
        )

    def candidates(self) -> List[int]:
        """前向路由候选：指针 ∪ 后继（去重，不含所有者）"""
        seen = {self.owner}
        out: List[int] = []
        for node in self.fingers + self.successors:
            if node not in seen:
                seen.add(node)
                out.append(node)
        return out


def recompute_successors(
    space: IdSpace,
    owner: int,
    neighbor_table: RoutingTable,
    size: int,
    alive: Callable[[int], bool],
) -> Tuple[int, ...]:
    """后继列表重算规则

    取 {s} ∪ s.successors ∪ s.predecessors 中存活的节点，按距 owner 的顺时针
    距离排序，截取前 size 个。CA 裁决使用同一规则。
    """
    pool = (neighbor_table.owner, *neighbor_table.successors, *neighbor_table.predecessors)
    return merge_ordered(space, owner, [n for n in pool if alive(n)], size)


def recompute_predecessors(
    space: IdSpace,
    owner: int,
    neighbor_table: RoutingTable,
    size: int,
    alive: Callable[[int], bool],
) -> Tuple[int, ...]:
    """前驱列表重算规则（逆时针对称）"""
    pool = (neighbor_table.owner, *neighbor_table.successors, *neighbor_table.predecessors)
    return merge_ordered(space, owner, [n for n in pool if alive(n)], size, clockwise=False)


def merge_ordered(space: IdSpace, owner: int, nodes: Sequence[int], size: int, clockwise: bool = True) -> Tuple[int, ...]:
    """按方向排序去重并截断"""
    pool = set(nodes)
    pool.discard(owner)
    if clockwise:
        ranked = sorted(pool, key=lambda n: space.distance(owner, n))
    else:
        ranked = sorted(pool, key=lambda n: space.distance(n, owner))
    return tuple(ranked[:size])
