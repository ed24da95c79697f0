"""
覆盖网络模块

负责节点创建与引导、双向稳定化、指针维护调度、加入/离开/吊销，
以及所有路由表应答（恶意节点的应答经 Adversary 改写后再签名）。
"""
from collections import deque
from functools import partial
from typing import TYPE_CHECKING, Callable, Deque, Dict, List, Optional, Sequence, Tuple

from ..config import Config
from ..utils import log
from .adversary import Adversary
from .bandwidth import BandwidthLedger, MessageClass
from .engine import Engine
from .lookup import resolve_from_successors
from .membership import Membership
from .proofs import FingerProof, FingerProofLog, FingerSource, ProofQueue
from .ring import IdSpace
from .rng import RngStreams, choice
from .routing_table import (
    QueryPurpose,
    RoutingTable,
    merge_ordered,
    recompute_predecessors,
    recompute_successors,
)
from .signing import SignatureAuthority

if TYPE_CHECKING:
    from .anonpath import AnonPathService
    from .lookup import LookupRecord, LookupService
    from .sentinel import Sentinel


class Node:
    """一个覆盖网络节点的本地状态"""

    __slots__ = (
        "id",
        "malicious",
        "joined_at",
        "fingers",
        "successors",
        "predecessors",
        "proof_queue",
        "finger_proofs",
        "kept_tables",
        "relay_pool",
        "next_finger",
        "ready",
    )

    def __init__(self, node_id: int, malicious: bool, joined_at: int, fingers: int, proof_queue: int, kept: int, pool: int):
        self.id = node_id
        self.malicious = malicious
        self.joined_at = joined_at
        self.fingers: List[int] = []
        self.successors: List[int] = []
        self.predecessors: List[int] = []
        self.proof_queue = ProofQueue(proof_queue)
        self.finger_proofs = FingerProofLog(fingers)
        self.kept_tables: Deque[RoutingTable] = deque(maxlen=kept)
        self.relay_pool: Deque[Tuple[int, int]] = deque(maxlen=pool)
        self.next_finger = 0
        self.ready = False

    def __repr__(self) -> str:
        return f"Node({self.id}, malicious={self.malicious})"


class Overlay:
    """Chord 风格的标识环

    Args:
        config: 主配置
        engine: 事件引擎
        membership: 存活集合
        rngs: 随机流
        authority: 签名代管
        ledger: 带宽账本
        adversary: 攻击者（可为空）
    """

    def __init__(
        self,
        config: Config,
        engine: Engine,
        membership: Membership,
        rngs: RngStreams,
        authority: SignatureAuthority,
        ledger: BandwidthLedger,
        adversary: Optional[Adversary] = None,
    ):
        self.config = config
        self.engine = engine
        self.membership = membership
        self.space: IdSpace = membership.space
        self.rngs = rngs
        self.rng = rngs["overlay"]
        self.authority = authority
        self.ledger = ledger
        self.sizes = ledger.sizes
        self.adversary = adversary
        self.S = config.overlay.successors
        self.F = config.overlay.fingers
        self.nodes: Dict[int, Node] = {}
        self.lookups: Optional["LookupService"] = None
        self.sentinel: Optional["Sentinel"] = None
        self.anonpath: Optional["AnonPathService"] = None
        self.on_join: List[Callable[[Node], None]] = []
        self.on_leave: List[Callable[[int, bool], None]] = []
        self.joins = 0
        self.departures = 0
        self.revocations = 0

    def attach(
        self,
        lookups: Optional["LookupService"] = None,
        sentinel: Optional["Sentinel"] = None,
        anonpath: Optional["AnonPathService"] = None,
    ) -> None:
        """挂接协议服务"""
        if lookups is not None:
            self.lookups = lookups
        if sentinel is not None:
            self.sentinel = sentinel
        if anonpath is not None:
            self.anonpath = anonpath

    # ------------------------------------------------------------------
    # 节点与引导
    # ------------------------------------------------------------------

    def is_alive(self, node: int) -> bool:
        return self.membership.is_alive(node)

    def node(self, node_id: int) -> Optional[Node]:
        return self.nodes.get(node_id)

    def alive_nodes(self) -> List[Node]:
        return [self.nodes[i] for i in self.membership.ids]

    def _new_id(self) -> int:
        rng = self.rngs["ids"]
        while True:
            candidate = int(rng.integers(0, self.space.size))
            if not self.membership.known(candidate):
                return candidate

    def create_node(self, malicious: bool = False, node_id: Optional[int] = None) -> Node:
        """创建节点并加入存活集合（不启动定时器）"""
        nid = self._new_id() if node_id is None else int(node_id)
        cfg = self.config
        node = Node(
            nid,
            malicious,
            self.engine.now,
            self.F,
            cfg.overlay.proof_queue,
            cfg.overlay.kept_tables,
            cfg.anonpath.pool_size,
        )
        self.membership.add(nid, self.engine.now)
        self.authority.enroll(nid)
        self.nodes[nid] = node
        if malicious and self.adversary is not None:
            self.adversary.add(nid)
        return node

    def bootstrap(
        self,
        n_nodes: int,
        malicious_count: int = 0,
        ids: Optional[Sequence[int]] = None,
        converged: Optional[bool] = None,
    ) -> List[Node]:
        """在 t=0 建立初始网络

        Args:
            n_nodes: 节点数
            malicious_count: 恶意节点数 ⌊f·N⌋
            ids: 指定的节点 ID（测试用），为空则随机
            converged: 是否直接收敛；为空取配置

        Returns:
            List[Node]: 创建的节点
        """
        if ids is not None:
            n_nodes = len(ids)
        order = self.rng.permutation(n_nodes)
        bad = {int(i) for i in order[:malicious_count]}
        nodes = [
            self.create_node(malicious=(k in bad), node_id=None if ids is None else ids[k])
            for k in range(n_nodes)
        ]
        if converged is None:
            converged = self.config.overlay.converged_start
        for node in nodes:
            if converged:
                self.converge(node)
            else:
                self.minimal_state(node)
        self.seed_proofs(nodes)
        log.info(
            "Bootstrapped %d nodes (%d malicious, converged=%s)", n_nodes, malicious_count, converged
        )
        return nodes

    def converge(self, node: Node) -> None:
        """按真实环状态填充路由表（收敛启动）"""
        m = self.membership
        node.successors = m.successors_of(node.id, self.S)
        node.predecessors = m.predecessors_of(node.id, self.S)
        node.fingers = [m.owner(t) for t in self.space.finger_targets(node.id, self.F)]
        node.ready = True

    def minimal_state(self, node: Node) -> None:
        """非收敛启动：只知道直接前驱和后继，指针暂用直接后继占位"""
        m = self.membership
        node.successors = m.successors_of(node.id, 1)
        node.predecessors = m.predecessors_of(node.id, 1)
        first = node.successors[0] if node.successors else node.id
        self.set_placeholders(node, first)
        node.ready = True

    def seed_proofs(self, nodes: Sequence[Node]) -> None:
        """引导时为每个节点存入其首个后继的签名表，并让后继列表与该证明一致"""
        tables = {}
        for node in nodes:
            if node.successors:
                s = self.nodes[node.successors[0]]
                tables[node.id] = self.truthful_table(s).signed(self.authority)
        for node in nodes:
            table = tables.get(node.id)
            if table is None:
                continue
            node.proof_queue.append(table, self.engine.now)
            node.successors = list(
                recompute_successors(self.space, node.id, table, self.S, self.membership.is_alive)
            )
        self.seed_finger_proofs(nodes)

    def seed_finger_proofs(self, nodes: Sequence[Node]) -> None:
        """为还没有证明的指针项补上解析依据：指针直接前驱的签名表

        该前驱的后继列表首项就是指针，理想 ID 落在两者之间，CA 可以像核对查找结果一样核对它。
        """
        resolvers: Dict[int, RoutingTable] = {}
        now = self.engine.now
        for node in nodes:
            for i, finger in enumerate(node.fingers):
                if finger == node.id or node.finger_proofs.current(i) is not None:
                    continue
                preds = self.membership.predecessors_of(finger, 1)
                if not preds or preds[0] not in self.nodes:
                    continue
                r = preds[0]
                table = resolvers.get(r)
                if table is None:
                    table = resolvers[r] = self.own_signed_table(self.nodes[r])
                target = self.space.ideal_finger_id(node.id, i + 1, self.F)
                if resolve_from_successors(self.space, r, table.successors, target) == finger:
                    node.finger_proofs.record(i, FingerProof(finger, now, FingerSource.LOOKUP, table))
                else:
                    node.finger_proofs.record(i, FingerProof(finger, now, FingerSource.PLACEHOLDER))
                    self.lookup_finger(node, i)

    def set_placeholders(self, node: Node, finger: int) -> None:
        node.fingers = [finger] * self.F
        for i in range(self.F):
            node.finger_proofs.record(i, FingerProof(finger, self.engine.now, FingerSource.PLACEHOLDER))

    # ------------------------------------------------------------------
    # 路由表应答
    # ------------------------------------------------------------------

    def truthful_table(self, node: Node) -> RoutingTable:
        return RoutingTable(
            owner=node.id,
            fingers=tuple(node.fingers),
            successors=tuple(node.successors),
            predecessors=tuple(node.predecessors),
            timestamp=self.engine.now,
        )

    def own_signed_table(self, node: Node) -> RoutingTable:
        return self.truthful_table(node).signed(self.authority)

    def serve_table(self, node_id: int, purpose: QueryPurpose) -> Optional[RoutingTable]:
        """node_id 应答一次路由表请求（签名后返回）"""
        node = self.nodes.get(node_id)
        if node is None:
            return None
        table = self.truthful_table(node)
        if node.malicious and self.adversary is not None:
            table = self.adversary.respond(node_id, table, purpose)
        return table.signed(self.authority)

    def keep_table(self, node: Node, table: RoutingTable) -> None:
        """保存外部路由表供指针监视使用"""
        if table.owner != node.id:
            node.kept_tables.append(table)

    # ------------------------------------------------------------------
    # 稳定化
    # ------------------------------------------------------------------

    def schedule_maintenance(self, node: Node) -> None:
        """启动周期定时器：稳定化（双向）与指针轮转刷新；检查与游走由各自服务调度"""
        ov = self.config.overlay
        engine = self.engine
        engine.every(int(ov.stabilize_interval_s * 1000), partial(self.stabilize, node), owner=node.id)
        engine.every(int(ov.finger_interval_s * 1000), partial(self.refresh_finger, node), owner=node.id)

    def stabilize(self, node: Node) -> None:
        self.purge_revoked_fingers(node)
        self.stabilize_successors(node)
        self.stabilize_predecessors(node)

    def _table_request(
        self,
        node: Node,
        target: int,
        purpose: QueryPurpose,
        on_reply: Callable[[RoutingTable], None],
        on_timeout: Callable[[], None],
        msg_class: MessageClass,
    ) -> None:
        self.engine.rpc(
            node.id,
            target,
            partial(self.serve_table, target, purpose),
            on_reply,
            on_timeout,
            msg_class=msg_class.value,
            request_bytes=self.sizes.request,
            reply_bytes=self.sizes.signed_table,
        )

    def stabilize_successors(self, node: Node) -> None:
        if not node.successors:
            self.repair(node, clockwise=True)
            if not node.successors:
                return
        s = node.successors[0]
        self._table_request(
            node,
            s,
            QueryPurpose.STABILIZE_SUCC,
            partial(self._on_successor_table, node, s),
            partial(self._on_neighbor_timeout, node, s, True),
            MessageClass.STABILIZE,
        )

    def stabilize_predecessors(self, node: Node) -> None:
        if not node.predecessors:
            self.repair(node, clockwise=False)
            if not node.predecessors:
                return
        p = node.predecessors[0]
        self._table_request(
            node,
            p,
            QueryPurpose.STABILIZE_PRED,
            partial(self._on_predecessor_table, node, p),
            partial(self._on_neighbor_timeout, node, p, False),
            MessageClass.STABILIZE,
        )

    def _ping_newcomers(self, node: Node, old: Sequence[int], new: Sequence[int]) -> None:
        known = set(old)
        for n in new:
            if n not in known:
                self.ledger.record((node.id, n), MessageClass.PING.value, self.sizes.request)
                self.ledger.record((n, node.id), MessageClass.PING.value, self.sizes.request)

    def _on_successor_table(self, node: Node, s: int, table: RoutingTable) -> None:
        if table.owner != s or not table.verify(self.authority):
            self._on_neighbor_timeout(node, s, True)
            return
        node.proof_queue.append(table, self.engine.now)
        new = recompute_successors(self.space, node.id, table, self.S, self.membership.is_alive)
        self._ping_newcomers(node, node.successors, new)
        node.successors = list(new)

    def _on_predecessor_table(self, node: Node, p: int, table: RoutingTable) -> None:
        if table.owner != p or not table.verify(self.authority):
            self._on_neighbor_timeout(node, p, False)
            return
        new = recompute_predecessors(self.space, node.id, table, self.S, self.membership.is_alive)
        self._ping_newcomers(node, node.predecessors, new)
        node.predecessors = list(new)

    def _on_neighbor_timeout(self, node: Node, neighbor: int, clockwise: bool) -> None:
        """邻居超时：前移到列表的下一项"""
        lst = node.successors if clockwise else node.predecessors
        if neighbor in lst:
            lst.remove(neighbor)
        if not lst:
            self.repair(node, clockwise)

    def repair(self, node: Node, clockwise: bool) -> None:
        """列表耗尽时从自身已知节点中找最近的存活节点；都不可用时经引导节点重新定位"""
        known = set(node.fingers) | set(node.successors) | set(node.predecessors)
        alive = [n for n in known if n != node.id and self.membership.is_alive(n)]
        if alive:
            nearest = merge_ordered(self.space, node.id, alive, 1, clockwise=clockwise)
        elif clockwise:
            nearest = tuple(self.membership.successors_of(node.id, 1))
        else:
            nearest = tuple(self.membership.predecessors_of(node.id, 1))
        if clockwise:
            node.successors = list(nearest)
        else:
            node.predecessors = list(nearest)

    def purge_revoked_fingers(self, node: Node) -> None:
        """已吊销的指针换成直接后继占位，并立即重新查找该指针项"""
        revoked = self.authority.revoked
        if not revoked or not node.successors:
            return
        for i, finger in enumerate(node.fingers):
            if finger in revoked:
                node.fingers[i] = node.successors[0]
                node.finger_proofs.record(
                    i, FingerProof(node.successors[0], self.engine.now, FingerSource.PLACEHOLDER)
                )
                self.lookup_finger(node, i)

    # ------------------------------------------------------------------
    # 指针维护
    # ------------------------------------------------------------------

    def refresh_finger(self, node: Node) -> None:
        """轮转刷新指针：直接查找理想 ID，结果交给安全更新或直接采用"""
        if self.lookups is None:
            return
        for _ in range(min(self.config.overlay.fingers_per_refresh, self.F)):
            i = node.next_finger
            node.next_finger = (i + 1) % self.F
            self.lookup_finger(node, i)

    def lookup_finger(self, node: Node, index: int) -> None:
        """对第 index 个指针项发起一次查找"""
        if self.lookups is None:
            return
        target = self.space.ideal_finger_id(node.id, index + 1, self.F)
        self.lookups.finger_lookup(node, target, partial(self._on_finger_lookup, node, index))

    def _on_finger_lookup(self, node: Node, index: int, record: "LookupRecord") -> None:
        if record.result is None or not record.resolved or not self.membership.is_alive(node.id):
            return
        candidate = record.result
        resolver = record.resolver_table
        if resolver is None:
            resolver = self.own_signed_table(node)
        if candidate == node.fingers[index]:
            self.set_finger(node, index, candidate, resolver)
            return
        if self.sentinel is not None and self.config.sentinel.secure_finger_update:
            self.sentinel.secure_finger_update(node, index, candidate, resolver)
        else:
            self.set_finger(node, index, candidate, resolver)

    def set_finger(self, node: Node, index: int, finger: int, resolver: RoutingTable) -> None:
        node.fingers[index] = finger
        node.finger_proofs.record(index, FingerProof(finger, self.engine.now, FingerSource.LOOKUP, resolver))

    # ------------------------------------------------------------------
    # 加入 / 离开 / 吊销
    # ------------------------------------------------------------------

    def start(self, node: Node) -> None:
        """节点进入运行态：启动维护定时器并通知各服务"""
        self.schedule_maintenance(node)
        for hook in self.on_join:
            hook(node)

    def join(self, malicious: bool = False, attempts: int = 3) -> Node:
        """新节点加入：经随机引导节点查找自己的 ID，复制后继的路由表作为第一条证明"""
        node = self.create_node(malicious=malicious)
        self.joins += 1
        if self.lookups is None or len(self.membership) < 2:
            self.converge(node)
            self.seed_proofs([node])
            self.start(node)
            return node
        self._join_attempt(node, attempts)
        return node

    def _join_attempt(self, node: Node, attempts: int) -> None:
        if not self.membership.is_alive(node.id):
            return
        others = [n for n in self.membership.ids if n != node.id]
        if attempts <= 0 or not others:
            self._join_fallback(node)
            return
        introducer = choice(self.rng, others)

        def on_intro(table: RoutingTable) -> None:
            if table.owner != introducer or not table.verify(self.authority):
                self._join_attempt(node, attempts - 1)
                return
            self.lookups.join_lookup(node, table, partial(self._on_join_lookup, node, attempts))

        self._table_request(
            node,
            introducer,
            QueryPurpose.DIRECT_LOOKUP,
            on_intro,
            partial(self._join_attempt, node, attempts - 1),
            MessageClass.JOIN,
        )

    def _on_join_lookup(self, node: Node, attempts: int, record: "LookupRecord") -> None:
        s = record.result
        if s is None or s == node.id:
            self._join_attempt(node, attempts - 1)
            return

        def on_table(table: RoutingTable) -> None:
            if table.owner != s or not table.verify(self.authority):
                self._join_attempt(node, attempts - 1)
                return
            now = self.engine.now
            alive = self.membership.is_alive
            node.proof_queue.append(table, now)
            node.successors = list(recompute_successors(self.space, node.id, table, self.S, alive))
            node.predecessors = list(recompute_predecessors(self.space, node.id, table, self.S, alive))
            self.set_placeholders(node, node.successors[0] if node.successors else s)
            self.notify(node, s)
            node.ready = True
            self.start(node)
            for i in range(self.F):
                self.lookup_finger(node, i)

        self._table_request(
            node,
            s,
            QueryPurpose.STABILIZE_SUCC,
            on_table,
            partial(self._join_attempt, node, attempts - 1),
            MessageClass.JOIN,
        )

    def _join_fallback(self, node: Node) -> None:
        log.debug("Join of %d fell back to oracle placement", node.id)
        self.converge(node)
        self.seed_proofs([node])
        self.start(node)

    def notify(self, node: Node, successor: int) -> None:
        """通知新后继把自己插入其前驱列表"""
        succ = self.nodes.get(successor)
        if succ is None:
            return
        self.ledger.record((node.id, successor), MessageClass.JOIN.value, self.sizes.request)
        succ.predecessors = list(
            merge_ordered(self.space, succ.id, [*succ.predecessors, node.id], self.S, clockwise=False)
        )

    def depart(self, node_id: int) -> bool:
        """节点离开（流失）；返回是否确实离开"""
        if not self.membership.remove(node_id, self.engine.now):
            return False
        node = self.nodes.pop(node_id, None)
        self.departures += 1
        if node is not None and node.malicious and self.adversary is not None:
            self.adversary.remove(node_id)
        for hook in self.on_leave:
            hook(node_id, False)
        return True

    def revoke(self, node_id: int) -> bool:
        """吊销证书并移出存活集合"""
        self.authority.revoke(node_id)
        if not self.membership.remove(node_id, self.engine.now):
            return False
        node = self.nodes.pop(node_id, None)
        self.revocations += 1
        if node is not None and node.malicious and self.adversary is not None:
            self.adversary.remove(node_id)
        for hook in self.on_leave:
            hook(node_id, True)
        return True
