"""
攻击者发现模块

- 秘密邻居监视：节点经两个中继匿名查询一个前驱，检查自己是否在其后继列表中；
- 秘密指针监视：对保存的外部路由表中的某个指针，询问其前驱并匿名查询一个前驱的后继列表；
- 安全指针更新：指针更新查找的结果先通过同样的检查再采用；
- CA 裁决：沿证明链追溯责任，定罪即吊销证书；
- 回执/见证人证据的逐跳核查。
"""
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple

from ..utils import log
from ..utils.exceptions import AdjudicationError
from .bandwidth import MessageClass
from .dos import DeliveryEvidence
from .lookup import resolve_from_successors
from .membership import Membership
from .proofs import FingerProof, FingerSource, ProofEntry
from .ring import IdSpace
from .rng import choice
from .routing_table import QueryPurpose, RoutingTable, Tamper, recompute_successors
from .signing import SignatureAuthority

if TYPE_CHECKING:
    from .anonpath import AnonPathService
    from .overlay import Node, Overlay


class Mechanism(str, Enum):
    """检测机制"""
    NEIGHBOR = "neighbor"
    FINGER = "finger"
    SECURE_UPDATE = "secure_update"
    DOS = "dos"


@dataclass(frozen=True)
class MisbehaviorReport:
    """提交给 CA 的举报

    Attributes:
        evidence: 被举报者签名的路由表（DoS 举报为空）
        victim: 被遗漏的节点（邻居类举报）
        finger_index / target / claimed_finger: 指针举报的指针项、理想 ID 与被质疑的指针
        witness_table: 匿名查询得到的前驱路由表
        listed_predecessor: 前驱列表举报中被质疑的前驱（evidence 为被举报者的前驱列表）
        delivery: DoS 举报的逐跳证据
    """
    report_id: int
    mechanism: Mechanism
    reporter: int
    accused: Optional[int]
    evidence: Optional[RoutingTable]
    time: int
    victim: Optional[int] = None
    finger_index: Optional[int] = None
    target: Optional[int] = None
    claimed_finger: Optional[int] = None
    witness_table: Optional[RoutingTable] = None
    listed_predecessor: Optional[int] = None
    delivery: Optional[DeliveryEvidence] = None


class ProofStatus(str, Enum):
    FOUND = "found"
    MISSING = "missing"
    EXPIRED = "expired"
    DEPARTED = "departed"
    REVOKED = "revoked"


@dataclass(frozen=True)
class ProofResponse:
    """被追溯节点对证明请求的答复"""
    status: ProofStatus
    entry: Optional[ProofEntry] = None
    finger: Optional[FingerProof] = None


ProofKey = Tuple[str, int, int, int]


@dataclass
class Verdict:
    """CA 裁决结果；collected 保存裁决时收集到的证明，供复核"""
    report_id: int
    mechanism: Mechanism
    convicted: Optional[int]
    chain: Tuple[int, ...]
    messages_processed: int
    time: int
    reason: str = ""
    rejected: bool = False
    collected: Dict[ProofKey, ProofResponse] = field(default_factory=dict, repr=False)


class Adjudicator:
    """与时间无关的裁决逻辑：只依赖证据、收集到的证明和成员日志

    Args:
        space: 标识环
        membership: 成员日志（历史存活判断）
        authority: 签名校验
        successors: 列表长度 S
        proof_queue: 证明队列长度 Q
        fingers: 指针表大小 F
        grace_ms: 核查前驱列表时不计入的新加入节点窗口
    """

    def __init__(
        self,
        space: IdSpace,
        membership: Membership,
        authority: SignatureAuthority,
        successors: int,
        proof_queue: int,
        fingers: int,
        grace_ms: int = 0,
    ):
        self.space = space
        self.membership = membership
        self.authority = authority
        self.S = successors
        self.Q = proof_queue
        self.F = fingers
        self.grace_ms = grace_ms

    def neighbor_chain(
        self,
        victim: int,
        accused: int,
        evidence: RoutingTable,
        fetch: Callable[[int, int], ProofResponse],
        chain: List[int],
    ) -> Tuple[Optional[int], str]:
        """沿证明链追溯遗漏 victim 的责任

        每一步检查当前节点 Z 在 t 时刻签出的表：
        表中含有 victim 时结束且不定罪；victim 当时不存活，或名次不小于 S
        且不落在 Z 的列表跨度之内时同样结束。Z 已被吊销时责任归于 Z；
        Z 拿不出 t 之前的有效证明时定罪；证明重算后含有 victim 时定罪 Z，
        否则嫌疑转移到证明的签名者。
        """
        m = self.membership
        current, table = accused, evidence
        for _ in range(self.S * self.Q):
            chain.append(current)
            t = table.timestamp
            if victim in table.successors:
                return None, "victim listed"
            if not m.alive_at(victim, t) or not self._expected(current, table, victim, t):
                return None, "victim not expected in list"
            resp = fetch(current, t)
            if resp.status is ProofStatus.REVOKED:
                return current, "accused already revoked"
            if resp.status is ProofStatus.DEPARTED:
                return None, "accused departed"
            if resp.status is ProofStatus.EXPIRED:
                return None, "proof expired"
            entry = resp.entry
            if entry is None or not entry.table.verify(self.authority):
                return current, "no valid proof"
            received = entry.received_at
            recomputed = recompute_successors(
                self.space, current, entry.table, self.S, lambda n: m.alive_at(n, received)
            )
            if victim in recomputed:
                return current, "list inconsistent with proof"
            current, table = entry.table.owner, entry.table
        return None, "chain cap reached"

    def finger(
        self,
        report: MisbehaviorReport,
        fetch_finger: Callable[[int, int, int], ProofResponse],
        fetch: Callable[[int, int], ProofResponse],
        chain: List[int],
    ) -> Tuple[Optional[int], str]:
        """指针举报：先核对被举报者的指针证明，再检查解析表是否遗漏了更近的节点"""
        accused = report.accused
        index = report.finger_index
        claimed = report.claimed_finger
        table = report.evidence
        t = table.timestamp
        target = self.space.ideal_finger_id(accused, index + 1, self.F)
        chain.append(accused)
        resp = fetch_finger(accused, index, t)
        if resp.status is ProofStatus.DEPARTED:
            return None, "accused departed"
        if resp.status is ProofStatus.EXPIRED:
            return None, "finger proof expired"
        proof = resp.finger
        if proof is None or proof.finger != claimed:
            return accused, "finger not backed by proof"
        if proof.source is not FingerSource.LOOKUP:
            return None, "placeholder finger"
        resolver = proof.resolver_table
        if resolver is None or not resolver.verify(self.authority):
            return accused, "invalid resolver table"
        if not self._resolves(resolver, target, claimed):
            return accused, "resolver table does not yield finger"
        return self._omitted(resolver, target, claimed, fetch, chain)

    def predecessor_list(
        self,
        report: MisbehaviorReport,
        fetch: Callable[[int, int], ProofResponse],
        chain: List[int],
    ) -> Tuple[Optional[int], str]:
        """前驱列表举报：被列出的前驱与被举报者之间已有不少于 S 个稳定存活的节点时定罪

        grace_ms 之内加入的节点不计入。前驱确在范围内而其签出的后继列表漏掉了
        被举报者时，按邻居遗漏沿该前驱的证明链追溯。
        """
        accused = report.accused
        listed = report.listed_predecessor
        t = report.evidence.timestamp
        m = self.membership
        chain.append(accused)
        if not m.alive_at(listed, t):
            return None, "listed predecessor had departed"
        if m.settled_between(listed, accused, t, t - self.grace_ms) >= self.S:
            return accused, "predecessor list inconsistent with ring"
        witness = report.witness_table
        if witness is not None and accused not in witness.successors:
            return self.neighbor_chain(accused, listed, witness, fetch, chain)
        return None, "listed predecessor within range"

    def _expected(self, owner: int, table: RoutingTable, victim: int, t: int) -> bool:
        """victim 名次小于 S，或落在已满的后继列表跨度之内"""
        if self.membership.historical_rank(owner, victim, t) < self.S:
            return True
        succ = table.successors
        return len(succ) >= self.S and self.space.in_open(victim, owner, succ[-1])

    def _resolves(self, resolver: RoutingTable, target: int, claimed: int) -> bool:
        return resolve_from_successors(self.space, resolver.owner, resolver.successors, target) == claimed

    def _omitted(
        self,
        resolver: RoutingTable,
        target: int,
        claimed: int,
        fetch: Callable[[int, int], ProofResponse],
        chain: List[int],
    ) -> Tuple[Optional[int], str]:
        # [target, claimed) 内的存活节点都夹在解析者和 claimed 之间
        omitted = [n for n in self.membership.alive_in_range(target, claimed, resolver.timestamp) if n != claimed]
        if not omitted:
            return None, "stale finger"
        if chain and chain[-1] == resolver.owner:
            chain.pop()
        return self.neighbor_chain(omitted[0], resolver.owner, resolver, fetch, chain)

    def dos(self, report: MisbehaviorReport, chain: List[int]) -> Tuple[Optional[int], str]:
        """逐跳要求转发者出示回执；第一个拿不出有效证据的转发者被定罪"""
        ev = report.delivery
        path = ev.path
        m = self.membership
        for k in range(1, len(path) - 1):
            forwarder, next_hop = path[k], path[k + 1]
            chain.append(forwarder)
            hop = ev.for_forwarder(forwarder)
            if hop is None or hop.empty or hop.next_hop != next_hop:
                return forwarder, "no forwarding evidence"
            r = hop.receipt
            if r is not None:
                if (
                    r.message_id == ev.message_id
                    and r.forwarder == forwarder
                    and r.receiver == next_hop
                    and r.verify(self.authority)
                ):
                    continue
                return forwarder, "invalid receipt"
            valid = [
                s
                for s in hop.statements
                if s.message_id == ev.message_id
                and s.forwarder == forwarder
                and s.receiver == next_hop
                and s.verify(self.authority)
            ]
            if not valid:
                return forwarder, "invalid failure statements"
            if m.alive_at(next_hop, valid[0].tag.timestamp):
                return next_hop, "receiver alive but unresponsive"
            return None, "receiver had departed"
        return None, "all hops acknowledged"


class CertificateAuthority:
    """零延迟的 CA：入口签名校验、裁决、吊销与消息计数

    Args:
        overlay: 覆盖网络
    """

    def __init__(self, overlay: "Overlay"):
        cfg = overlay.config.overlay
        self.overlay = overlay
        self.engine = overlay.engine
        self.authority = overlay.authority
        self.membership = overlay.membership
        self.adjudicator = Adjudicator(
            overlay.space,
            overlay.membership,
            overlay.authority,
            cfg.successors,
            cfg.proof_queue,
            cfg.fingers,
            int(overlay.config.sentinel.predecessor_grace_s * 1000),
        )
        self.reports: List[MisbehaviorReport] = []
        self.verdicts: List[Verdict] = []
        self.convictions: Dict[int, Tuple[int, Mechanism]] = {}
        self.message_log: List[Tuple[int, int]] = []
        self.on_verdict: List[Callable[[MisbehaviorReport, Verdict], None]] = []
        self._next_id = 0

    def new_report_id(self) -> int:
        self._next_id += 1
        return self._next_id

    @property
    def messages_processed(self) -> int:
        return sum(n for _, n in self.message_log)

    # 证明收集

    def _fetch_proof(self, store: Dict[ProofKey, ProofResponse], node_id: int, t: int) -> ProofResponse:
        key = ("succ", node_id, t, -1)
        cached = store.get(key)
        if cached is not None:
            return cached
        node = self.overlay.nodes.get(node_id)
        if node_id in self.convictions:
            resp = ProofResponse(ProofStatus.REVOKED)
        elif node is None:
            resp = ProofResponse(ProofStatus.DEPARTED)
        else:
            entry = node.proof_queue.latest_before(t)
            if entry is not None:
                resp = ProofResponse(ProofStatus.FOUND, entry=entry)
            elif len(node.proof_queue):
                resp = ProofResponse(ProofStatus.EXPIRED)
            else:
                resp = ProofResponse(ProofStatus.MISSING)
        store[key] = resp
        return resp

    def _fetch_finger(self, store: Dict[ProofKey, ProofResponse], node_id: int, index: int, t: int) -> ProofResponse:
        key = ("finger", node_id, t, index)
        cached = store.get(key)
        if cached is not None:
            return cached
        node = self.overlay.nodes.get(node_id)
        if node is None:
            resp = ProofResponse(ProofStatus.DEPARTED)
        else:
            proof = node.finger_proofs.latest_before(index, t)
            if proof is not None:
                resp = ProofResponse(ProofStatus.FOUND, finger=proof)
            elif node.finger_proofs.current(index) is not None:
                resp = ProofResponse(ProofStatus.EXPIRED)
            else:
                resp = ProofResponse(ProofStatus.MISSING)
        store[key] = resp
        return resp

    @staticmethod
    def _replay(store: Dict[ProofKey, ProofResponse]):
        def fetch(node_id: int, t: int) -> ProofResponse:
            resp = store.get(("succ", node_id, t, -1))
            if resp is None:
                raise AdjudicationError(f"No stored proof for node {node_id} at t={t}")
            return resp

        def fetch_finger(node_id: int, index: int, t: int) -> ProofResponse:
            resp = store.get(("finger", node_id, t, index))
            if resp is None:
                raise AdjudicationError(f"No stored finger proof for node {node_id}[{index}] at t={t}")
            return resp

        return fetch, fetch_finger

    # 入口

    def _ingress(self, report: MisbehaviorReport) -> Optional[str]:
        """入口校验，返回拒绝原因"""
        if report.mechanism is Mechanism.DOS:
            if report.delivery is None or len(report.delivery.path) < 3:
                return "missing delivery evidence"
            return None
        ev = report.evidence
        if ev is None or ev.owner != report.accused or not ev.verify(self.authority):
            return "evidence signature invalid"
        if report.accused in self.convictions:
            return "accused already revoked"
        if report.listed_predecessor is not None:
            w = report.witness_table
            if report.listed_predecessor not in ev.predecessors:
                return "predecessor not in evidence"
            if w is None or w.owner != report.listed_predecessor or not w.verify(self.authority):
                return "witness table invalid"
            return None
        if report.mechanism is Mechanism.FINGER:
            idx = report.finger_index
            if idx is None or not 0 <= idx < len(ev.fingers) or ev.fingers[idx] != report.claimed_finger:
                return "claimed finger not in evidence"
        elif report.victim is None:
            return "missing victim"
        return None

    def _decide(
        self,
        report: MisbehaviorReport,
        fetch: Callable[[int, int], ProofResponse],
        fetch_finger: Callable[[int, int, int], ProofResponse],
        chain: List[int],
    ) -> Tuple[Optional[int], str]:
        adj = self.adjudicator
        if report.mechanism is Mechanism.DOS:
            return adj.dos(report, chain)
        if report.listed_predecessor is not None:
            return adj.predecessor_list(report, fetch, chain)
        if report.mechanism is Mechanism.FINGER:
            return adj.finger(report, fetch_finger, fetch, chain)
        return adj.neighbor_chain(report.victim, report.accused, report.evidence, fetch, chain)

    def adjudicate(self, report: MisbehaviorReport) -> Verdict:
        """裁决一份举报（不吊销）"""
        now = self.engine.now
        reason = self._ingress(report)
        if reason is not None:
            log.debug("Report %d rejected at ingress: %s", report.report_id, reason)
            return Verdict(report.report_id, report.mechanism, None, (), 1, now, reason, rejected=True)
        store: Dict[ProofKey, ProofResponse] = {}
        chain: List[int] = []
        convicted, why = self._decide(
            report,
            partial(self._fetch_proof, store),
            partial(self._fetch_finger, store),
            chain,
        )
        return Verdict(
            report.report_id,
            report.mechanism,
            convicted,
            tuple(chain),
            1 + 2 * len(chain),
            now,
            why,
            collected=store,
        )

    def reverify(self, report: MisbehaviorReport, verdict: Verdict) -> Verdict:
        """只用裁决时存下的证明重新裁决

        Raises:
            AdjudicationError: 复核需要的证明不在存档中
        """
        if verdict.rejected:
            return verdict
        fetch, fetch_finger = self._replay(verdict.collected)
        chain: List[int] = []
        convicted, why = self._decide(report, fetch, fetch_finger, chain)
        return Verdict(
            report.report_id,
            report.mechanism,
            convicted,
            tuple(chain),
            1 + 2 * len(chain),
            verdict.time,
            why,
            collected=verdict.collected,
        )

    def submit(self, report: MisbehaviorReport) -> Verdict:
        """接收举报、裁决并执行吊销"""
        self.reports.append(report)
        verdict = self.adjudicate(report)
        self.verdicts.append(verdict)
        self.message_log.append((verdict.time, verdict.messages_processed))
        if verdict.convicted is not None and verdict.convicted not in self.convictions:
            node = verdict.convicted
            malicious = self.overlay.adversary is not None and self.overlay.adversary.is_malicious(node)
            self.convictions[node] = (verdict.time, report.mechanism)
            self.overlay.revoke(node)
            log.info(
                "CA convicted node %d via %s report %d (chain %d, malicious=%s)",
                node,
                report.mechanism.value,
                report.report_id,
                len(verdict.chain),
                malicious,
            )
        for hook in self.on_verdict:
            hook(report, verdict)
        return verdict

    def convictions_by_mechanism(self) -> Dict[Mechanism, int]:
        return dict(Counter(mech for _, mech in self.convictions.values()))


class CheckStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    INCONCLUSIVE = "inconclusive"
    INCONSISTENT = "inconsistent"


@dataclass
class FingerCheck:
    """一次指针核查的结果"""
    status: CheckStatus
    target: int
    candidate: int
    closer: List[int] = field(default_factory=list)
    predecessor_table: Optional[RoutingTable] = None
    witness_table: Optional[RoutingTable] = None


@dataclass
class MechanismStats:
    """单个检测机制的逐次测试统计"""
    tests: int = 0
    manipulated: int = 0
    missed: int = 0
    reports: int = 0
    abandoned: int = 0

    @property
    def false_negative_rate(self) -> float:
        return self.missed / self.manipulated if self.manipulated else 0.0


class Sentinel:
    """诚实节点运行的监视与安全更新

    Args:
        overlay: 覆盖网络
        ca: 证书中心
        anonpath: 匿名路径服务（提供双中继查询）
    """

    def __init__(self, overlay: "Overlay", ca: CertificateAuthority, anonpath: "AnonPathService"):
        self.overlay = overlay
        self.engine = overlay.engine
        self.ca = ca
        self.anonpath = anonpath
        self.config = overlay.config.sentinel
        self.space = overlay.space
        self.membership = overlay.membership
        self.rng = overlay.rngs["checks"]
        self.stats: Dict[Mechanism, MechanismStats] = {m: MechanismStats() for m in Mechanism}
        if self.config.dos_defense:
            anonpath.on_drop = self.report_dos

    def start(self, node: "Node") -> None:
        """为节点安排检查；启用作恶行为时恶意节点不参与"""
        adv = self.overlay.adversary
        if node.malicious and adv is not None and adv.misbehaving:
            return
        cfg = self.config
        if cfg.neighbor_surveillance:
            self._schedule_neighbor(node)
        if cfg.finger_surveillance:
            period = int(cfg.finger_check_interval_s * 1000)
            phase = int(self.rng.integers(0, period))
            self.engine.every(
                period, partial(self.finger_check, node), owner=node.id, first_at=self.engine.now + phase
            )

    def _file(self, report: MisbehaviorReport) -> Verdict:
        self.stats[report.mechanism].reports += 1
        return self.ca.submit(report)

    def _alive(self, node: "Node") -> bool:
        return self.overlay.is_alive(node.id)

    # 秘密邻居监视

    def _schedule_neighbor(self, node: "Node") -> None:
        t_max = int(self.config.check_interval_max_s * 1000)
        delay = 1 + int(self.rng.integers(0, t_max))
        self.engine.after(delay, partial(self._neighbor_tick, node), owner=node.id)

    def _neighbor_tick(self, node: "Node") -> None:
        self.neighbor_check(node)
        self._schedule_neighbor(node)

    def neighbor_check(self, node: "Node") -> None:
        """随机选一个前驱，经两个中继匿名查询其路由表"""
        stats = self.stats[Mechanism.NEIGHBOR]
        preds = [p for p in node.predecessors if p != node.id]
        if not preds:
            stats.abandoned += 1
            return
        p = choice(self.rng, preds)
        sent = self.anonpath.surveillance_query(
            node,
            p,
            partial(self._on_neighbor_reply, node, p),
            partial(self._abandon, Mechanism.NEIGHBOR, node, p),
        )
        if not sent:
            self._abandon(Mechanism.NEIGHBOR, node, p)

    def _abandon(self, mechanism: Mechanism, node: "Node", target: int) -> None:
        self.stats[mechanism].abandoned += 1
        log.debug("%s check by %d on %d abandoned", mechanism.value, node.id, target)

    def _on_neighbor_reply(self, node: "Node", p: int, table: RoutingTable) -> None:
        stats = self.stats[Mechanism.NEIGHBOR]
        if table.owner != p or not table.verify(self.overlay.authority):
            self._abandon(Mechanism.NEIGHBOR, node, p)
            return
        self.overlay.keep_table(node, table)
        stats.tests += 1
        manipulated = bool(table.tamper & Tamper.SUCCESSORS)
        if manipulated:
            stats.manipulated += 1
        expected = self.membership.rank_after(p, node.id) < self.overlay.S
        if node.id in table.successors or not expected:
            if manipulated:
                stats.missed += 1
            return
        self._file(
            MisbehaviorReport(
                report_id=self.ca.new_report_id(),
                mechanism=Mechanism.NEIGHBOR,
                reporter=node.id,
                accused=p,
                evidence=table,
                time=self.engine.now,
                victim=node.id,
            )
        )

    # 指针核查（秘密指针监视与安全指针更新共用）

    def verify_finger(
        self,
        node: "Node",
        target: int,
        candidate: int,
        on_result: Callable[[FingerCheck], None],
    ) -> None:
        """向 candidate 要前驱列表，随机等待后匿名查询其中一个前驱的后继列表

        - 该前驱本身或其后继中有未吊销的节点比 candidate 更接近 target：FAILED；
        - 否则该前驱的后继列表已满、不含 candidate 且全部位于 candidate 之前，
          说明 candidate 列出的前驱与环不符：INCONSISTENT；
        - 其余情况 PASSED。
        """
        ov = self.overlay
        cfg = self.config

        def inconclusive() -> None:
            on_result(FingerCheck(CheckStatus.INCONCLUSIVE, target, candidate))

        if candidate == node.id:
            inconclusive()
            return

        def on_preds(table: RoutingTable) -> None:
            if table.owner != candidate or not table.verify(ov.authority):
                inconclusive()
                return
            preds = [p for p in table.predecessors if p != node.id]
            if not preds:
                inconclusive()
                return
            lo = int(cfg.check_delay_min_s * 1000)
            hi = int(cfg.check_delay_max_s * 1000)
            wait = lo + int(self.rng.integers(0, hi - lo + 1))
            self.engine.after(wait, partial(ask_witness, table, preds), owner=node.id)

        def ask_witness(pred_table: RoutingTable, preds: Sequence[int]) -> None:
            p1 = choice(self.rng, preds)
            sent = self.anonpath.surveillance_query(
                node, p1, partial(on_witness, pred_table, p1), inconclusive
            )
            if not sent:
                inconclusive()

        def on_witness(pred_table: RoutingTable, p1: int, table: RoutingTable) -> None:
            if table.owner != p1 or not table.verify(ov.authority):
                inconclusive()
                return
            ov.keep_table(node, table)
            space = self.space
            revoked = ov.authority.revoked
            limit = space.distance(target, candidate)
            closer = sorted(
                {
                    n
                    for n in (p1, *table.successors)
                    if n != candidate and n not in revoked and space.distance(target, n) < limit
                },
                key=lambda n: space.distance(target, n),
            )
            if closer:
                status = CheckStatus.FAILED
            elif self._falls_short(p1, candidate, table):
                status = CheckStatus.INCONSISTENT
            else:
                status = CheckStatus.PASSED
            on_result(FingerCheck(status, target, candidate, closer, pred_table, table))

        self.engine.rpc(
            node.id,
            candidate,
            partial(ov.serve_table, candidate, QueryPurpose.PREDECESSOR_REQUEST),
            on_preds,
            inconclusive,
            msg_class=MessageClass.SURVEILLANCE.value,
            request_bytes=ov.sizes.request,
            reply_bytes=ov.sizes.signed_list,
        )

    def _falls_short(self, p1: int, candidate: int, table: RoutingTable) -> bool:
        """p1 的后继列表已满且全部落在 candidate 之前"""
        succ = table.successors
        if candidate in succ or len(succ) < self.overlay.S:
            return False
        reach = self.space.distance(p1, candidate)
        return all(self.space.distance(p1, s) < reach for s in succ)

    # 秘密指针监视

    def finger_check(self, node: "Node") -> None:
        """从保存的外部路由表中随机抽一个指针项核查"""
        stats = self.stats[Mechanism.FINGER]
        ov = self.overlay
        oldest = self.engine.now - int(self.config.kept_table_max_age_s * 1000)
        tables = [
            t
            for t in node.kept_tables
            if t.owner != node.id and t.timestamp >= oldest and ov.is_alive(t.owner)
        ]
        if not tables:
            stats.abandoned += 1
            return
        table = choice(self.rng, tables)
        # 与后继重合的指针项多半是占位，不作核查
        indices = [i for i, f in enumerate(table.fingers) if f != table.owner and f not in table.successors]
        if not indices:
            stats.abandoned += 1
            return
        index = choice(self.rng, indices)
        claimed = table.fingers[index]
        target = self.space.ideal_finger_id(table.owner, index + 1, len(table.fingers))
        self.verify_finger(node, target, claimed, partial(self._on_finger_check, node, table, index))

    def _finger_manipulated(self, table: RoutingTable, index: int) -> bool:
        owner = self.overlay.nodes.get(table.owner)
        if owner is None:
            return bool(table.tamper & Tamper.FINGERS)
        proof = owner.finger_proofs.latest_before(index, table.timestamp)
        if proof is None:
            return bool(table.tamper & Tamper.FINGERS)
        return proof.finger != table.fingers[index]

    def _on_finger_check(self, node: "Node", table: RoutingTable, index: int, check: FingerCheck) -> None:
        stats = self.stats[Mechanism.FINGER]
        if check.status is CheckStatus.INCONCLUSIVE:
            self._abandon(Mechanism.FINGER, node, table.owner)
            return
        stats.tests += 1
        manipulated = self._finger_manipulated(table, index)
        if manipulated:
            stats.manipulated += 1
        if check.status is CheckStatus.PASSED:
            if manipulated:
                stats.missed += 1
            return
        if not self._alive(node):
            return
        if check.status is CheckStatus.INCONSISTENT:
            self._file(self._predecessor_report(Mechanism.FINGER, node, check))
            return
        self._file(
            MisbehaviorReport(
                report_id=self.ca.new_report_id(),
                mechanism=Mechanism.FINGER,
                reporter=node.id,
                accused=table.owner,
                evidence=table,
                time=self.engine.now,
                victim=check.closer[0],
                finger_index=index,
                target=check.target,
                claimed_finger=check.candidate,
                witness_table=check.witness_table,
            )
        )

    def _predecessor_report(self, mechanism: Mechanism, node: "Node", check: FingerCheck) -> MisbehaviorReport:
        """举报 candidate 签出的前驱列表"""
        witness = check.witness_table
        return MisbehaviorReport(
            report_id=self.ca.new_report_id(),
            mechanism=mechanism,
            reporter=node.id,
            accused=check.candidate,
            evidence=check.predecessor_table,
            time=self.engine.now,
            target=check.target,
            claimed_finger=check.candidate,
            witness_table=witness,
            listed_predecessor=witness.owner,
        )

    # 安全指针更新

    def secure_finger_update(self, node: "Node", index: int, candidate: int, resolver: RoutingTable) -> None:
        """核查通过才采用 candidate；发现更近的节点时举报解析出它的节点，
        前驱列表与环不符时举报 candidate，超时则保留旧指针"""
        target = self.space.ideal_finger_id(node.id, index + 1, self.overlay.F)
        self.verify_finger(
            node, target, candidate, partial(self._on_secure_check, node, index, candidate, resolver)
        )

    def _on_secure_check(
        self,
        node: "Node",
        index: int,
        candidate: int,
        resolver: RoutingTable,
        check: FingerCheck,
    ) -> None:
        stats = self.stats[Mechanism.SECURE_UPDATE]
        if not self._alive(node):
            return
        if check.status is CheckStatus.INCONCLUSIVE:
            self._abandon(Mechanism.SECURE_UPDATE, node, candidate)
            return
        stats.tests += 1
        adv = self.overlay.adversary
        manipulated = adv is not None and adv.is_malicious(candidate) and bool(resolver.tamper & Tamper.SUCCESSORS)
        if manipulated:
            stats.manipulated += 1
        if check.status is CheckStatus.PASSED:
            if manipulated:
                stats.missed += 1
            if self.overlay.is_alive(candidate):
                self.overlay.set_finger(node, index, candidate, resolver)
            return
        if check.status is CheckStatus.INCONSISTENT:
            self._file(self._predecessor_report(Mechanism.SECURE_UPDATE, node, check))
            return
        if resolver.owner == node.id:
            return
        self._file(
            MisbehaviorReport(
                report_id=self.ca.new_report_id(),
                mechanism=Mechanism.SECURE_UPDATE,
                reporter=node.id,
                accused=resolver.owner,
                evidence=resolver,
                time=self.engine.now,
                victim=check.closer[0],
                target=check.target,
                claimed_finger=candidate,
                witness_table=check.witness_table,
            )
        )

    # 选择性丢包

    def report_dos(self, initiator: int, path: Tuple[int, ...], evidence: DeliveryEvidence) -> Optional[Verdict]:
        """匿名查询超时且出口中继仍存活时，把路径与逐跳证据交给 CA"""
        stats = self.stats[Mechanism.DOS]
        stats.tests += 1
        if evidence.dropped_at is not None:
            stats.manipulated += 1
        if not self.overlay.is_alive(initiator):
            return None
        return self._file(
            MisbehaviorReport(
                report_id=self.ca.new_report_id(),
                mechanism=Mechanism.DOS,
                reporter=initiator,
                accused=None,
                evidence=None,
                time=self.engine.now,
                delivery=evidence,
            )
        )
