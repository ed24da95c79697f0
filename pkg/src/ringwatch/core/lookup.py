"""
迭代查找模块

每个被查询节点返回完整的带签名路由表，由发起者选择下一跳。目标键从不发给中间节点。
"""
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from itertools import count
from typing import TYPE_CHECKING, Callable, Deque, Dict, Iterable, List, Optional, Protocol, Sequence, Set

from ..config import Transport
from ..utils import log
from ..utils.exceptions import LookupFailure
from .bandwidth import MessageClass
from .ring import IdSpace
from .routing_table import QueryPurpose, RoutingTable

if TYPE_CHECKING:
    from .overlay import Node, Overlay


def closest_preceding(space: IdSpace, candidates: Iterable[int], at: int, key: int) -> Optional[int]:
    """candidates 中位于开区间 (at, key) 内、离 key 最近的节点"""
    best: Optional[int] = None
    best_d = 0
    for c in candidates:
        if not space.in_open(c, at, key):
            continue
        d = space.distance(c, key)
        if best is None or d < best_d:
            best, best_d = c, d
    return best


def resolve_from_successors(space: IdSpace, owner: int, successors: Sequence[int], key: int) -> Optional[int]:
    """若 key 落在 owner 的后继列表覆盖范围内，返回其所有者，否则返回 None"""
    if key == owner:
        return owner
    prev = owner
    for s in successors:
        if space.in_half_open(key, prev, s):
            return s
        prev = s
    return None


class LookupStatus(str, Enum):
    """查找结果状态"""
    PENDING = "pending"
    SUCCEEDED = "succeeded"
    BIASED = "biased"
    FAILED = "failed"


@dataclass(frozen=True)
class LookupHop:
    node: int
    table: RoutingTable
    time: int


@dataclass
class LookupRecord:
    """一次查找的完整记录"""
    lookup_id: int
    initiator: int
    key: int
    started_at: int
    purpose: QueryPurpose
    msg_class: str
    hops: List[LookupHop] = field(default_factory=list)
    result: Optional[int] = None
    status: LookupStatus = LookupStatus.PENDING
    resolved: bool = False
    resolver_table: Optional[RoutingTable] = None
    finished_at: Optional[int] = None
    queries: int = 0
    timeouts: int = 0

    @property
    def hop_count(self) -> int:
        return len(self.hops)

    @property
    def done(self) -> bool:
        return self.status is not LookupStatus.PENDING

    @property
    def queried(self) -> List[int]:
        return [h.node for h in self.hops]


class QueryTransport(Protocol):
    """查找使用的查询通道"""

    purpose: QueryPurpose

    def open(self, record: LookupRecord, ready: Callable[[], None]) -> None:
        ...

    def query(
        self,
        record: LookupRecord,
        target: int,
        on_reply: Callable[[RoutingTable], None],
        on_timeout: Callable[[], None],
    ) -> None:
        ...

    def close(self, record: LookupRecord) -> None:
        ...


class DirectTransport:
    """普通 DHT 查询：发起者直接联系被查询节点"""

    purpose = QueryPurpose.DIRECT_LOOKUP

    def __init__(self, overlay: "Overlay"):
        self.overlay = overlay

    def open(self, record: LookupRecord, ready: Callable[[], None]) -> None:
        ready()

    def query(
        self,
        record: LookupRecord,
        target: int,
        on_reply: Callable[[RoutingTable], None],
        on_timeout: Callable[[], None],
    ) -> None:
        ov = self.overlay
        ov.engine.rpc(
            record.initiator,
            target,
            partial(ov.serve_table, target, record.purpose),
            on_reply,
            on_timeout,
            msg_class=record.msg_class,
            request_bytes=ov.sizes.request,
            reply_bytes=ov.sizes.signed_table,
        )

    def close(self, record: LookupRecord) -> None:
        return None


class _LookupRun:
    """单次查找的状态机"""

    __slots__ = (
        "service", "node", "record", "transport", "on_done",
        "table", "queried", "failed", "retried", "known", "budget",
    )

    def __init__(
        self,
        service: "LookupService",
        node: "Node",
        record: LookupRecord,
        transport: QueryTransport,
        first_table: RoutingTable,
        on_done: Optional[Callable[[LookupRecord], None]],
    ):
        self.service = service
        self.node = node
        self.record = record
        self.transport = transport
        self.on_done = on_done
        self.table = first_table
        self.queried: Set[int] = {record.initiator, first_table.owner}
        self.failed: Set[int] = set()
        self.retried: Set[int] = set()
        self.known: Set[int] = set()
        self.budget = service.budget

    def start(self) -> None:
        self.transport.open(self.record, partial(self._advance, self.table))

    def _advance(self, table: RoutingTable) -> None:
        space = self.service.space
        self.table = table
        self.known.add(table.owner)
        self.known.update(table.candidates())
        found = resolve_from_successors(space, table.owner, table.successors, self.record.key)
        if found is not None:
            self._finish(found, resolved=True, resolver=table)
            return
        self._next(table.candidates())

    def _next(self, candidates: Iterable[int]) -> None:
        skip = self.queried | self.failed
        nxt = closest_preceding(
            self.service.space,
            (c for c in candidates if c not in skip),
            self.table.owner,
            self.record.key,
        )
        if nxt is None:
            self._give_up()
            return
        self._query(nxt)

    def _query(self, target: int) -> None:
        record = self.record
        if record.queries >= self.budget:
            self._finish(None)
            return
        record.queries += 1
        self.transport.query(
            record,
            target,
            partial(self._on_reply, target),
            partial(self._on_timeout, target),
        )

    def _on_reply(self, target: int, table: RoutingTable) -> None:
        if self.record.done:
            return
        if table.owner != target or not table.verify(self.service.overlay.authority):
            self._on_failed(target)
            return
        self.queried.add(target)
        self.record.hops.append(LookupHop(target, table, self.service.engine.now))
        self.service.overlay.keep_table(self.node, table)
        self._advance(table)

    def _on_timeout(self, target: int) -> None:
        if self.record.done:
            return
        self.record.timeouts += 1
        if target not in self.retried:
            self.retried.add(target)
            self._query(target)
            return
        self._on_failed(target)

    def _on_failed(self, target: int) -> None:
        # 绕行：在已知的全部候选中重新选择
        self.failed.add(target)
        self._next([*self.table.candidates(), *self.known])

    def _give_up(self) -> None:
        space = self.service.space
        key = self.record.key
        pool = [n for n in self.known if n not in self.failed and n != self.record.initiator]
        if not pool:
            self._finish(None)
            return
        self._finish(min(pool, key=lambda n: space.distance(key, n)), resolved=False)

    def _finish(self, result: Optional[int], resolved: bool = False, resolver: Optional[RoutingTable] = None) -> None:
        record = self.record
        record.result = result
        record.resolved = resolved
        record.resolver_table = resolver
        record.finished_at = self.service.engine.now
        if result is None:
            record.status = LookupStatus.FAILED
        elif result != self.service.overlay.membership.owner(record.key):
            record.status = LookupStatus.BIASED
        else:
            record.status = LookupStatus.SUCCEEDED
        self.transport.close(record)
        self.service.complete(record)
        if self.on_done is not None:
            self.on_done(record)


@dataclass
class HopStats:
    """查找跳数分布"""
    histogram: Dict[int, int]
    failures: int
    total: int

    @property
    def mean(self) -> float:
        n = sum(self.histogram.values())
        if n == 0:
            return 0.0
        return sum(h * c for h, c in self.histogram.items()) / n


def hop_count_stats(records: Iterable[LookupRecord]) -> HopStats:
    """统计完成的查找的跳数（失败的查找只计数）"""
    hist: Counter = Counter()
    failures = 0
    total = 0
    for r in records:
        total += 1
        if r.status is LookupStatus.FAILED:
            failures += 1
        else:
            hist[r.hop_count] += 1
    return HopStats(histogram=dict(sorted(hist.items())), failures=failures, total=total)


class LookupService:
    """查找服务：普通查找、指针更新查找、加入查找以及周期查找负载

    Args:
        overlay: 覆盖网络
        history: 保留的已完成查找记录数
    """

    def __init__(self, overlay: "Overlay", history: int = 20_000):
        self.overlay = overlay
        self.engine = overlay.engine
        self.space = overlay.space
        self.config = overlay.config
        self.rng = overlay.rngs["workload"]
        self.budget = 3 * overlay.F
        self.direct = DirectTransport(overlay)
        self.anonymous: Optional[QueryTransport] = None
        self.history: Deque[LookupRecord] = deque(maxlen=history)
        self.on_complete: List[Callable[[LookupRecord], None]] = []
        self.hop_histogram: Counter = Counter()
        self.status_counts: Counter = Counter()
        self._ids = count()

    def use_anonymous(self, transport: QueryTransport) -> None:
        self.anonymous = transport

    def complete(self, record: LookupRecord) -> None:
        if record.msg_class != MessageClass.LOOKUP.value:
            return
        self.history.append(record)
        self.status_counts[record.status] += 1
        if record.status is not LookupStatus.FAILED:
            self.hop_histogram[record.hop_count] += 1
        for hook in self.on_complete:
            hook(record)

    def iterative_lookup(
        self,
        node: "Node",
        key: int,
        transport: Optional[QueryTransport] = None,
        msg_class: MessageClass = MessageClass.LOOKUP,
        on_done: Optional[Callable[[LookupRecord], None]] = None,
        first_table: Optional[RoutingTable] = None,
    ) -> LookupRecord:
        """从 node 的路由表出发查找 key

        Args:
            node: 发起者
            key: 目标键
            transport: 查询通道，默认直接查询
            msg_class: 带宽统计类别
            on_done: 完成回调
            first_table: 起始路由表，默认为发起者自己的签名表

        Returns:
            LookupRecord: 查找记录（异步填充）

        Raises:
            LookupFailure: 发起者不在线
        """
        if not self.overlay.is_alive(node.id):
            raise LookupFailure(f"Lookup initiator {node.id} is not alive", details={"key": key})
        transport = transport or self.direct
        record = LookupRecord(
            lookup_id=next(self._ids),
            initiator=node.id,
            key=int(key) % self.space.size,
            started_at=self.engine.now,
            purpose=transport.purpose,
            msg_class=msg_class.value,
        )
        table = first_table or self.overlay.own_signed_table(node)
        _LookupRun(self, node, record, transport, table, on_done).start()
        return record

    def finger_lookup(self, node: "Node", target: int, on_done: Callable[[LookupRecord], None]) -> LookupRecord:
        """指针更新查找（总是直接查询）"""
        return self.iterative_lookup(node, target, self.direct, MessageClass.FINGER_UPDATE, on_done)

    def join_lookup(self, node: "Node", intro_table: RoutingTable, on_done: Callable[[LookupRecord], None]) -> LookupRecord:
        """新节点从引导节点的路由表出发查找自己的 ID"""
        return self.iterative_lookup(node, node.id, self.direct, MessageClass.JOIN, on_done, first_table=intro_table)

    def start_workload(self, node: "Node") -> None:
        """每个节点每个查找周期发起一次随机键查找，起始相位随机"""
        wl = self.config.workload
        if not wl.lookups:
            return
        period = int(wl.lookup_period_s * 1000)
        phase = int(self.rng.integers(0, period))
        self.engine.every(period, partial(self._workload_lookup, node), owner=node.id, first_at=self.engine.now + phase)

    def _workload_lookup(self, node: "Node") -> None:
        key = int(self.rng.integers(0, self.space.size))
        transport: QueryTransport = self.direct
        if self.config.workload.transport is Transport.ANON and self.anonymous is not None:
            transport = self.anonymous
        self.iterative_lookup(node, key, transport)

    def stats(self) -> HopStats:
        failures = self.status_counts[LookupStatus.FAILED]
        total = sum(self.status_counts.values())
        return HopStats(histogram=dict(sorted(self.hop_histogram.items())), failures=failures, total=total)

    def log_summary(self) -> None:
        s = self.stats()
        log.info(
            "Lookups: %d total, %d failed, %d biased, mean hops %.2f",
            s.total,
            s.failures,
            self.status_counts[LookupStatus.BIASED],
            s.mean,
        )
