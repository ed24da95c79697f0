"""
匿名路径模块

- 两阶段随机游走选择中继：第一阶段由发起者逐跳随机选择，第二阶段由 U_l 按种子哈希链确定，
  发起者事后逐跳核验；
- 多路径匿名查询：一次查找共享入口中继 A 与中间中继 B，每个查询（含伪查询）使用新的出口对 (C_i, D_i)；
- 秘密监视使用的双中继匿名查询。
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from hashlib import blake2b
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..utils import log
from ..utils.exceptions import PathSetError, WalkError
from .bandwidth import MessageClass
from .observations import ObservationClass, SharedIntel
from .ring import IdSpace
from .rng import choice
from .routing_table import QueryPurpose, RoutingTable

if TYPE_CHECKING:
    from .adversary import Adversary
    from .dos import DeliveryEvidence, ReceiptProtocol
    from .lookup import LookupRecord
    from .overlay import Node, Overlay

RelayPair = Tuple[int, int]


def seed_indices(seed: bytes, steps: int, fingers: int) -> List[int]:
    """第二阶段各跳的指针下标：第 j 跳取 H^j(seed) mod F（从 0 开始）"""
    out: List[int] = []
    h = seed
    for _ in range(steps):
        h = blake2b(h, digest_size=16).digest()
        out.append(int.from_bytes(h, "big") % fingers)
    return out


@dataclass
class WalkTranscript:
    """一次两阶段随机游走的记录

    phase1 为 U_1..U_l，phase2 为 U_{l+1}..U_{2l}；
    tables 为 U_1..U_{l-1} 返回的路由表，phase2_tables 为 U_l..U_{2l-1} 返回的路由表。
    """
    initiator: int
    length: int
    phase1: List[int] = field(default_factory=list)
    phase2: List[int] = field(default_factory=list)
    seed: bytes = b""
    tables: List[RoutingTable] = field(default_factory=list)
    phase2_tables: List[RoutingTable] = field(default_factory=list)
    restarts: int = 0
    verified: bool = False

    @property
    def hops(self) -> List[int]:
        return self.phase1 + self.phase2

    @property
    def outcome(self) -> RelayPair:
        hops = self.hops
        if len(hops) < 2:
            raise WalkError("Walk transcript is incomplete", details={"initiator": self.initiator})
        return hops[-2], hops[-1]


def verify_phase2(
    transcript: WalkTranscript,
    fingers: int,
    verify_table: Optional[Callable[[RoutingTable], bool]] = None,
) -> bool:
    """按种子重算第二阶段的每一跳并核对签名表"""
    l = transcript.length
    if len(transcript.phase2) != l or len(transcript.phase2_tables) != l or not transcript.phase1:
        return False
    expected = transcript.phase1[-1]
    for table, hop, idx in zip(transcript.phase2_tables, transcript.phase2, seed_indices(transcript.seed, l, fingers)):
        if table.owner != expected or len(table.fingers) <= idx:
            return False
        if verify_table is not None and not verify_table(table):
            return False
        if table.fingers[idx] != hop:
            return False
        expected = hop
    return True


def walk_static(
    initiator: int,
    initiator_fingers: Sequence[int],
    table_of: Callable[[int], RoutingTable],
    length: int,
    fingers: int,
    rng: np.random.Generator,
) -> WalkTranscript:
    """在静态路由状态上同步完成一次诚实的两阶段游走"""
    w = WalkTranscript(initiator=initiator, length=length)
    w.phase1.append(choice(rng, initiator_fingers))
    for _ in range(length - 1):
        table = table_of(w.phase1[-1])
        w.tables.append(table)
        w.phase1.append(choice(rng, table.fingers))
    w.seed = rng.bytes(16)
    cur = w.phase1[-1]
    for idx in seed_indices(w.seed, length, fingers):
        table = table_of(cur)
        w.phase2_tables.append(table)
        cur = table.fingers[idx]
        w.phase2.append(cur)
    w.verified = True
    return w


class EnvelopeKind(str, Enum):
    """查询封装类型（对中继与被查询节点不可见）"""
    TRUE = "true"
    DUMMY = "dummy"


@dataclass(frozen=True)
class QueryEnvelope:
    """洋葱封装的查询；layers 为完整路径（发起者在前）"""
    kind: EnvelopeKind
    target: int
    lookup_id: int
    layers: Tuple[int, ...]


@dataclass
class PathSet:
    """一次查找的多路径结构"""
    initiator: int
    entry: int
    middle: int
    exits: List[RelayPair]
    delay_max_ms: int
    used: int = 0

    def path(self, index: int, target: int) -> Tuple[int, ...]:
        c, d = self.exits[index]
        return (self.initiator, self.entry, self.middle, c, d, target)

    def relays(self) -> Set[int]:
        out = {self.entry, self.middle}
        for c, d in self.exits:
            out.update((c, d))
        return out

    def disjoint(self) -> bool:
        seen: Set[int] = {self.entry, self.middle}
        for c, d in self.exits:
            if c in seen or d in seen or c == d:
                return False
            seen.update((c, d))
        return True


def _usable(pair: RelayPair, initiator: int, taken: Set[int]) -> bool:
    c, d = pair
    return c != d and initiator not in pair and c not in taken and d not in taken


def build_pathset(
    initiator: int,
    pool: Sequence[RelayPair],
    k_true: int,
    k_dummy: int,
    rng: np.random.Generator,
    delay_max_ms: int = 100,
) -> PathSet:
    """从中继对池中分配 A、B 与 k_true + k_dummy 个互不相交的出口对

    Raises:
        PathSetError: 池中互不相交的中继对不足
    """
    pairs = list(pool)
    order = [int(i) for i in rng.permutation(len(pairs))]
    taken: Set[int] = set()
    picked: List[RelayPair] = []
    need = 1 + k_true + k_dummy
    for i in order:
        pair = pairs[i]
        if _usable(pair, initiator, taken):
            picked.append(pair)
            taken.update(pair)
            if len(picked) == need:
                break
    if len(picked) < need:
        raise PathSetError(
            f"Relay pool underflow: need {need} disjoint pairs, have {len(picked)}",
            details={"initiator": initiator, "pool": len(pairs)},
        )
    (a, b), exits = picked[0], picked[1:]
    return PathSet(initiator, a, b, exits, delay_max_ms)


def extend_pathset(pathset: PathSet, pool: Sequence[RelayPair], rng: np.random.Generator) -> RelayPair:
    """为追加的查询补一个新的出口对"""
    taken = pathset.relays()
    candidates = [p for p in pool if _usable(p, pathset.initiator, taken)]
    if not candidates:
        raise PathSetError("No fresh exit pair left in the relay pool", details={"initiator": pathset.initiator})
    pair = choice(rng, candidates)
    pathset.exits.append(pair)
    return pair


def schedule_dummies(k_true: int, k_dummy: int, rng: np.random.Generator) -> List[EnvelopeKind]:
    """把 k_dummy 个伪查询均匀随机地插入 k_true 个真查询之间"""
    total = k_true + k_dummy
    plan = [EnvelopeKind.TRUE] * total
    if k_dummy > 0:
        for pos in rng.choice(total, size=k_dummy, replace=False):
            plan[int(pos)] = EnvelopeKind.DUMMY
    return plan


def dummy_target(space: IdSpace, known: Sequence[int], rng: np.random.Generator) -> int:
    """随机 ID 在发起者已知节点中的顺时针第一个节点"""
    v = int(rng.integers(0, space.size))
    return min(known, key=lambda n: space.distance(v, n))


class _Walk:
    __slots__ = ("node", "transcript", "on_done", "attempt", "retries1", "retries2", "deadline", "walk_id")

    def __init__(self, node: "Node", length: int, on_done: Callable[[Optional[WalkTranscript]], None], walk_id: int):
        self.node = node
        self.transcript = WalkTranscript(initiator=node.id, length=length)
        self.on_done = on_done
        self.attempt = 0
        self.retries1 = 0
        self.retries2 = 0
        self.deadline = None
        self.walk_id = walk_id


class RandomWalkService:
    """事件驱动的两阶段随机游走

    Args:
        overlay: 覆盖网络
        intel: 共享信息通道（记录游走观测）
        adversary: 攻击者（第二阶段伪造）
    """

    def __init__(self, overlay: "Overlay", intel: SharedIntel, adversary: Optional["Adversary"] = None):
        self.overlay = overlay
        self.engine = overlay.engine
        self.intel = intel
        self.adversary = adversary
        self.rng = overlay.rngs["walks"]
        self.length = overlay.config.walk_length
        self.max_retries = overlay.config.anonpath.walk_retries
        self.F = overlay.F
        self.completed = 0
        self.failed = 0
        self.verification_failures = 0
        self._ids = 0

    def _observe(self, path: Sequence[int], token: int) -> None:
        malicious = self.intel.malicious
        now = self.engine.now
        last = len(path) - 1
        for k in range(1, last + 1):
            node = path[k]
            if node in malicious:
                nxt = path[k + 1] if k < last else None
                self.intel.observe(node, ObservationClass.WALK_HOP, (path[k - 1], nxt), now, token)

    def walk(self, node: "Node", on_done: Callable[[Optional[WalkTranscript]], None]) -> None:
        """发起一次游走；完成时回调 on_done(transcript)，失败时回调 on_done(None)"""
        self._ids += 1
        w = _Walk(node, self.length, on_done, self._ids)
        self._phase1_begin(w)

    def _fail(self, w: _Walk) -> None:
        self.failed += 1
        log.debug("Random walk of %d abandoned after retries", w.node.id)
        w.on_done(None)

    # 第一阶段

    def _phase1_begin(self, w: _Walk) -> None:
        fingers = [f for f in w.node.fingers if f != w.node.id]
        if not fingers:
            self._fail(w)
            return
        t = w.transcript
        t.phase1 = [choice(self.rng, fingers)]
        t.tables = []
        self._phase1_step(w)

    def _phase1_step(self, w: _Walk) -> None:
        t = w.transcript
        if len(t.phase1) == t.length:
            self._phase2_begin(w)
            return
        ov = self.overlay
        cur = t.phase1[-1]
        via = tuple(t.phase1[:-1])
        self._observe((w.node.id, *t.phase1), w.walk_id)
        self.engine.rpc(
            w.node.id,
            cur,
            partial(ov.serve_table, cur, QueryPurpose.WALK),
            partial(self._phase1_reply, w, cur),
            partial(self._phase1_restart, w),
            via=via,
            msg_class=MessageClass.WALK.value,
            request_bytes=ov.sizes.onion(ov.sizes.request, len(via)),
            reply_bytes=ov.sizes.onion(ov.sizes.signed_table, len(via)),
        )

    def _phase1_reply(self, w: _Walk, cur: int, table: RoutingTable) -> None:
        if table.owner != cur or not table.verify(self.overlay.authority) or not table.fingers:
            self._phase1_restart(w)
            return
        t = w.transcript
        t.tables.append(table)
        self.overlay.keep_table(w.node, table)
        t.phase1.append(choice(self.rng, table.fingers))
        self._phase1_step(w)

    def _phase1_restart(self, w: _Walk) -> None:
        w.retries1 += 1
        w.transcript.restarts += 1
        if w.retries1 > self.max_retries:
            self._fail(w)
            return
        self._phase1_begin(w)

    # 第二阶段

    def _phase2_begin(self, w: _Walk) -> None:
        t = w.transcript
        ov = self.overlay
        w.attempt += 1
        attempt = w.attempt
        t.seed = self.rng.bytes(16)
        path = (w.node.id, *t.phase1)
        relays = len(path) - 2
        self._observe(path, w.walk_id)
        budget = self.engine.timeout_for(path) * (t.length + 1)
        w.deadline = self.engine.after(budget, partial(self._phase2_deadline, w, attempt), owner=w.node.id)
        self.engine.send_path(
            path,
            t.seed,
            partial(self._at_last_hop, w, attempt, t.phase1[-1]),
            msg_class=MessageClass.WALK.value,
            nbytes=ov.sizes.onion(ov.sizes.request, relays),
        )

    def _at_last_hop(self, w: _Walk, attempt: int, walker: int, seed: bytes) -> None:
        """U_l 按种子继续走 l 步"""
        own = self.overlay.serve_table(walker, QueryPurpose.WALK)
        if own is None:
            return
        indices = seed_indices(seed, w.transcript.length, self.F)
        self._walker_step(w, attempt, walker, indices, [own], [])

    def _walker_step(
        self,
        w: _Walk,
        attempt: int,
        walker: int,
        indices: List[int],
        tables: List[RoutingTable],
        hops: List[int],
    ) -> None:
        j = len(hops)
        table = tables[-1]
        honest = table.fingers[indices[j]]
        nxt = honest
        adv = self.adversary
        if adv is not None and adv.is_malicious(walker):
            forged = adv.bias_walk_choice(table, honest)
            if forged is not None:
                nxt = forged
        hops.append(nxt)
        ov = self.overlay
        if len(hops) == len(indices):
            back = (walker, *reversed(w.transcript.phase1[:-1]), w.node.id)
            self.engine.send_path(
                back,
                (tuple(hops), tuple(tables)),
                partial(self._phase2_result, w, attempt),
                msg_class=MessageClass.WALK.value,
                nbytes=ov.sizes.onion(ov.sizes.signed_table * len(tables), len(back) - 2),
            )
            return
        self._observe((walker, nxt), w.walk_id)
        self.engine.rpc(
            walker,
            nxt,
            partial(ov.serve_table, nxt, QueryPurpose.WALK),
            lambda reply: self._walker_step(w, attempt, walker, indices, [*tables, reply], hops),
            None,
            msg_class=MessageClass.WALK.value,
            request_bytes=ov.sizes.request,
            reply_bytes=ov.sizes.signed_table,
        )

    def _phase2_result(self, w: _Walk, attempt: int, payload: Tuple[Tuple[int, ...], Tuple[RoutingTable, ...]]) -> None:
        if attempt != w.attempt:
            return
        if w.deadline is not None:
            w.deadline.cancel()
        t = w.transcript
        t.phase2, t.phase2_tables = list(payload[0]), list(payload[1])
        if not verify_phase2(t, self.F, lambda tb: tb.verify(self.overlay.authority)):
            self.verification_failures += 1
            log.debug("Phase-2 transcript from %d failed seed verification", t.phase1[-1])
            self._phase2_restart(w)
            return
        t.verified = True
        for table in t.phase2_tables:
            self.overlay.keep_table(w.node, table)
        self.completed += 1
        w.on_done(t)

    def _phase2_deadline(self, w: _Walk, attempt: int) -> None:
        if attempt == w.attempt:
            self._phase2_restart(w)

    def _phase2_restart(self, w: _Walk) -> None:
        """从 U_{l-1} 的路由表中换一个 U_l 重新开始第二阶段"""
        w.retries2 += 1
        t = w.transcript
        t.restarts += 1
        w.attempt += 1
        if w.retries2 > self.max_retries:
            self._fail(w)
            return
        current = t.phase1[-1]
        pool = t.tables[-1].fingers if t.tables else tuple(w.node.fingers)
        options = [n for n in pool if n != current and n != w.node.id]
        if not options:
            self._fail(w)
            return
        t.phase1[-1] = choice(self.rng, options)
        t.phase2, t.phase2_tables = [], []
        self._phase2_begin(w)


class AnonPathService:
    """中继池、双中继监视查询与多路径匿名查询

    Args:
        overlay: 覆盖网络
        intel: 共享信息通道
        adversary: 攻击者
        receipts: 回执协议
    """

    def __init__(
        self,
        overlay: "Overlay",
        intel: SharedIntel,
        adversary: Optional["Adversary"] = None,
        receipts: Optional["ReceiptProtocol"] = None,
    ):
        self.overlay = overlay
        self.engine = overlay.engine
        self.config = overlay.config.anonpath
        self.intel = intel
        self.adversary = adversary
        self.receipts = receipts
        self.walks = RandomWalkService(overlay, intel, adversary)
        self.rng = overlay.rngs["relays"]
        self.dummy_rng = overlay.rngs["dummies"]
        self.on_drop: Optional[Callable[[int, Tuple[int, ...], object], None]] = None
        self.transport = AnonMultipathTransport(self)
        self.instant_walks = 0
        self.drops = 0
        self.queries = 0
        self.dummies = 0

    # 中继池

    def _table_of(self, node_id: int) -> RoutingTable:
        node = self.overlay.nodes[node_id]
        return self.overlay.truthful_table(node)

    def instant_walk(self, node: "Node") -> Optional[RelayPair]:
        """在当前路由状态上同步完成一次游走（预热与池补充），按游走流量记账"""
        ov = self.overlay
        fingers = [f for f in node.fingers if f != node.id and ov.is_alive(f)]
        if not fingers:
            return None
        length = self.walks.length
        try:
            w = walk_static(node.id, fingers, self._table_of, length, ov.F, self.walks.rng)
        except KeyError:
            return None
        self.instant_walks += 1
        ov.ledger.record((node.id, *w.hops), MessageClass.WALK.value, ov.sizes.signed_table)
        c, d = w.outcome
        if c == d or node.id in (c, d):
            return None
        return c, d

    def prefill(self, nodes: Sequence["Node"]) -> None:
        """引导时把每个节点的中继对池填满"""
        size = self.config.pool_size
        for node in nodes:
            for _ in range(size * 2):
                if len(node.relay_pool) >= size:
                    break
                pair = self.instant_walk(node)
                if pair is not None:
                    node.relay_pool.append(pair)

    def start(self, node: "Node") -> None:
        """后台游走：每个 walk_interval 刷新一个中继对"""
        period = int(self.config.walk_interval_s * 1000)
        phase = int(self.rng.integers(0, period))
        self.engine.every(period, partial(self.refresh_pool, node), owner=node.id, first_at=self.engine.now + phase)

    def refresh_pool(self, node: "Node") -> None:
        def done(transcript: Optional[WalkTranscript]) -> None:
            if transcript is None:
                return
            c, d = transcript.outcome
            if c != d and node.id not in (c, d):
                node.relay_pool.append((c, d))

        self.walks.walk(node, done)

    def live_pairs(self, node: "Node") -> List[RelayPair]:
        """剔除含已离开中继的中继对"""
        alive = self.overlay.is_alive
        live = [p for p in node.relay_pool if alive(p[0]) and alive(p[1])]
        if len(live) != len(node.relay_pool):
            node.relay_pool.clear()
            node.relay_pool.extend(live)
        return live

    def ensure_pairs(self, node: "Node", needed: int) -> List[RelayPair]:
        pairs = self.live_pairs(node)
        attempts = 0
        while len(pairs) < needed and attempts < needed * 3:
            attempts += 1
            pair = self.instant_walk(node)
            if pair is not None:
                node.relay_pool.append(pair)
                pairs = list(node.relay_pool)
        return pairs

    def take_pair(self, node: "Node", exclude: Sequence[int] = ()) -> Optional[RelayPair]:
        skip = set(exclude)
        skip.add(node.id)
        pairs = [p for p in self.ensure_pairs(node, 1) if p[0] not in skip and p[1] not in skip and p[0] != p[1]]
        if not pairs:
            pair = self.instant_walk(node)
            if pair is None or pair[0] in skip or pair[1] in skip:
                return None
            node.relay_pool.append(pair)
            return pair
        return choice(self.rng, pairs)

    # 查询

    def _relay_delay(self) -> int:
        dmax = self.config.relay_delay_max_ms
        if dmax <= 0:
            return 0
        return int(self.rng.integers(0, dmax + 1))

    def surveillance_query(
        self,
        node: "Node",
        target: int,
        on_reply: Callable[[RoutingTable], None],
        on_timeout: Callable[[], None],
        msg_class: MessageClass = MessageClass.SURVEILLANCE,
    ) -> bool:
        """经两个中继匿名地向 target 请求路由表；没有可用中继时返回 False"""
        pair = self.take_pair(node, exclude=(target,))
        if pair is None:
            return False
        ov = self.overlay
        path = (node.id, pair[0], pair[1], target)
        self.intel.observe_path(list(path), self.engine.now)
        self.engine.rpc(
            node.id,
            target,
            partial(ov.serve_table, target, QueryPurpose.LOOKUP),
            on_reply,
            on_timeout,
            via=pair,
            msg_class=msg_class.value,
            request_bytes=ov.sizes.onion(ov.sizes.request, 2),
            reply_bytes=ov.sizes.onion(ov.sizes.signed_table, 2),
        )
        return True

    def provision(self, node: "Node", k_true: int, k_dummy: int) -> PathSet:
        """检查 A、B 存活后分配路径结构；池不足时先补充游走"""
        pairs = self.ensure_pairs(node, 1 + k_true + k_dummy)
        return build_pathset(node.id, pairs, k_true, k_dummy, self.rng, self.config.relay_delay_max_ms)

    def anon_query(
        self,
        pathset: PathSet,
        envelope: QueryEnvelope,
        on_reply: Callable[[RoutingTable], None],
        on_timeout: Callable[[], None],
    ) -> None:
        """I → A → B → C_i → D_i → 被查询节点，应答原路返回"""
        ov = self.overlay
        path = envelope.layers
        target = envelope.target
        now = self.engine.now
        self.queries += 1
        self.intel.observe_path(list(path), now, envelope.lookup_id)
        drop = self.adversary.selective_drop(path) if self.adversary is not None else None
        if drop is None:
            handler = partial(ov.serve_table, target, QueryPurpose.LOOKUP)
            evidence = None
        else:
            self.drops += 1
            strategy = self.adversary.drop_strategy()
            evidence = self.receipts.transmit(path, now, drop, strategy) if self.receipts is not None else None
            handler = lambda: None  # noqa: E731

        def timed_out() -> None:
            self._report_loss(pathset, path, evidence)
            on_timeout()

        relays = len(path) - 2
        self.engine.rpc(
            path[0],
            target,
            handler,
            on_reply,
            timed_out,
            via=path[1:-1],
            msg_class=MessageClass.DUMMY.value if envelope.kind is EnvelopeKind.DUMMY else MessageClass.LOOKUP.value,
            request_bytes=ov.sizes.onion(ov.sizes.request, relays),
            reply_bytes=ov.sizes.onion(ov.sizes.signed_table, relays),
            relay_delay=self._relay_delay,
            extra_timeout_ms=2 * pathset.delay_max_ms,
        )

    def _report_loss(self, pathset: PathSet, path: Tuple[int, ...], evidence: Optional["DeliveryEvidence"]) -> None:
        """查询超时：经邻居确认 C_i、D_i 仍存活、且逐跳证据能指认丢包者时把全部中继交给 CA

        中继流失造成的丢失不举报。
        """
        if self.on_drop is None or self.receipts is None:
            return
        alive = self.overlay.is_alive
        if not (alive(path[3]) and alive(path[4])):
            return
        if evidence is None:
            evidence = self.receipts.transmit(path, self.engine.now)
        if not self.receipts.attributes(evidence):
            log.debug("Lost query on %s not attributable to a relay", path)
            return
        self.on_drop(pathset.initiator, path, evidence)

    def send_dummy(self, node: "Node", pathset: PathSet, lookup_id: int, exit_index: int) -> None:
        known = [n for n in (*node.fingers, *node.successors, *node.predecessors) if n != node.id]
        if not known:
            return
        target = dummy_target(self.overlay.space, known, self.dummy_rng)
        self.dummies += 1
        envelope = QueryEnvelope(EnvelopeKind.DUMMY, target, lookup_id, pathset.path(exit_index, target))
        self.anon_query(pathset, envelope, lambda table: None, lambda: None)


@dataclass
class _Circuit:
    node: "Node"
    pathset: PathSet
    plan: List[EnvelopeKind]
    next_exit: int = 0


class AnonMultipathTransport:
    """查找的多路径匿名传输（带伪查询）"""

    purpose = QueryPurpose.LOOKUP

    def __init__(self, service: AnonPathService):
        self.service = service
        self.circuits: Dict[int, _Circuit] = {}
        self.fallbacks = 0

    @property
    def expected_queries(self) -> int:
        n = max(2, len(self.service.overlay.membership))
        return max(1, math.ceil(math.log2(n)) // 2)

    def open(self, record: "LookupRecord", ready: Callable[[], None]) -> None:
        svc = self.service
        node = svc.overlay.nodes.get(record.initiator)
        k_true = self.expected_queries
        k_dummy = svc.config.k_dummy
        try:
            pathset = svc.provision(node, k_true, k_dummy)
        except PathSetError as e:
            self.fallbacks += 1
            log.debug("Anonymous lookup %d falls back to direct queries: %s", record.lookup_id, str(e))
        else:
            plan = schedule_dummies(k_true, k_dummy, svc.dummy_rng)
            self.circuits[record.lookup_id] = _Circuit(node, pathset, plan)
        ready()

    def _next_exit(self, c: _Circuit) -> Optional[int]:
        if c.next_exit >= len(c.pathset.exits):
            try:
                extend_pathset(c.pathset, self.service.live_pairs(c.node), self.service.rng)
            except PathSetError:
                return None
        idx = c.next_exit
        c.next_exit += 1
        return idx

    def _dispatch_dummy(self, c: _Circuit, lookup_id: int) -> None:
        idx = self._next_exit(c)
        if idx is not None:
            self.service.send_dummy(c.node, c.pathset, lookup_id, idx)

    def query(
        self,
        record: "LookupRecord",
        target: int,
        on_reply: Callable[[RoutingTable], None],
        on_timeout: Callable[[], None],
    ) -> None:
        c = self.circuits.get(record.lookup_id)
        if c is None:
            self.service.overlay.lookups.direct.query(record, target, on_reply, on_timeout)
            return
        while c.plan and c.plan[0] is EnvelopeKind.DUMMY:
            c.plan.pop(0)
            self._dispatch_dummy(c, record.lookup_id)
        if c.plan:
            c.plan.pop(0)
        idx = self._next_exit(c)
        if idx is None:
            self.service.overlay.lookups.direct.query(record, target, on_reply, on_timeout)
            return
        envelope = QueryEnvelope(EnvelopeKind.TRUE, target, record.lookup_id, c.pathset.path(idx, target))
        self.service.anon_query(c.pathset, envelope, on_reply, on_timeout)

    def close(self, record: "LookupRecord") -> None:
        c = self.circuits.pop(record.lookup_id, None)
        if c is None:
            return
        for kind in c.plan:
            if kind is EnvelopeKind.DUMMY:
                self._dispatch_dummy(c, record.lookup_id)
