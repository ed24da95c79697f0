"""
场景装配模块

由一份 Config 构建完整的模拟：引擎、成员关系、覆盖网络、攻击者、查找负载、
匿名路径、监视机制、CA、流失过程与指标采集。
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set

from ..config import Config, Transport
from ..utils import log
from .adversary import Adversary
from .anonpath import AnonPathService
from .bandwidth import BandwidthLedger, MessageSizes
from .churn import ChurnModel, ChurnProcess
from .dos import ReceiptProtocol
from .engine import Engine
from .latency import LatencyModel
from .lookup import HopStats, LookupService
from .membership import Membership
from .metrics import MetricsRecorder, SecurityMetrics
from .observations import SharedIntel
from .overlay import Node, Overlay
from .ring import IdSpace
from .rng import RngStreams
from .sentinel import CertificateAuthority, Sentinel
from .signing import SignatureAuthority

ProgressCallback = Callable[[int, int], None]


@dataclass
class ScenarioResult:
    """一次场景运行的结果"""
    name: str
    seed: int
    duration_ms: int
    metrics: List[SecurityMetrics]
    summary: Dict[str, object]
    bandwidth: List[Dict[str, object]]
    hops: HopStats
    events: int
    trace_digest: Optional[str] = None
    churn: Dict[str, int] = field(default_factory=dict)


class Scenario:
    """按配置装配的一次事件驱动模拟

    Args:
        config: 主配置
        record_trace: 是否记录事件轨迹摘要（确定性检查用）
    """

    def __init__(self, config: Config, record_trace: bool = False):
        self.config = config
        ov = config.overlay
        self.rngs = RngStreams(config.engine.seed)
        self.space = IdSpace(ov.id_bits)
        self.membership = Membership(self.space)
        self.engine = Engine(
            LatencyModel.from_config(config.engine),
            self.rngs["latency"],
            self.membership.is_alive,
            timeout_factor=config.engine.timeout_factor,
            timeout_floor_ms=config.engine.timeout_floor_ms,
            record_trace=record_trace,
        )
        self.ledger = BandwidthLedger(
            MessageSizes.from_config(config.bandwidth, ov.fingers, ov.successors), config.bandwidth.enabled
        )
        self.engine.on_message = self.ledger.record
        self.authority = SignatureAuthority(self.rngs["keys"])
        self.intel = SharedIntel()
        self.adversary = Adversary(
            config.adversary,
            self.space,
            ov.successors,
            ov.fingers,
            self.rngs["adversary"],
            self.intel,
            lambda: self.engine.now,
        )
        self.overlay = Overlay(
            config, self.engine, self.membership, self.rngs, self.authority, self.ledger, self.adversary
        )
        self.lookups = LookupService(self.overlay)
        self.receipts = ReceiptProtocol(self.authority, self._witnesses_of, self.overlay.is_alive)
        self.anonpath = AnonPathService(self.overlay, self.intel, self.adversary, self.receipts)
        self.ca = CertificateAuthority(self.overlay)
        sc = config.sentinel
        self.sentinel: Optional[Sentinel] = None
        if sc.neighbor_surveillance or sc.finger_surveillance or sc.secure_finger_update or sc.dos_defense:
            self.sentinel = Sentinel(self.overlay, self.ca, self.anonpath)
        self.overlay.attach(self.lookups, self.sentinel, self.anonpath)
        if config.workload.transport is Transport.ANON:
            self.lookups.use_anonymous(self.anonpath.transport)
        self.churn = ChurnProcess(
            ChurnModel.from_config(config.churn),
            self.engine,
            self.rngs["churn"],
            on_depart=self._depart,
            on_arrive=self._replace,
            tick_ms=int(config.churn.tick_s * 1000),
        )
        self.metrics = MetricsRecorder(
            self.overlay,
            self.ca,
            self.sentinel,
            self.lookups,
            interval_ms=config.engine.metrics_interval_s * 1000,
        )
        self.overlay.on_join.append(self._on_join)
        self._bad_departures: Set[int] = set()
        self._ready = False

    @property
    def needs_relays(self) -> bool:
        sc = self.config.sentinel
        return (
            sc.neighbor_surveillance
            or sc.finger_surveillance
            or sc.secure_finger_update
            or self.config.workload.transport is Transport.ANON
        )

    @property
    def malicious_count(self) -> int:
        return int(math.floor(self.config.adversary.fraction * self.config.overlay.n_nodes))

    def _witnesses_of(self, node_id: int) -> List[int]:
        node = self.overlay.nodes.get(node_id)
        if node is None:
            return []
        return [*node.successors, *node.predecessors]

    def _runs_checks(self, node: Node) -> bool:
        # 没有启用作恶行为时恶意节点与诚实节点完全一致
        return not (node.malicious and self.adversary.misbehaving)

    def _on_join(self, node: Node) -> None:
        self.churn.register(node.id)
        self.lookups.start_workload(node)
        if self.needs_relays:
            self.anonpath.start(node)
        if self.sentinel is not None and self._runs_checks(node):
            self.sentinel.start(node)

    def _depart(self, node_id: int) -> bool:
        malicious = self.intel.is_malicious(node_id)
        if not self.overlay.depart(node_id):
            return False
        if malicious:
            self._bad_departures.add(node_id)
        return True

    def _replace(self, departed: int) -> int:
        """流失补充：新节点继承离开节点的恶意标记"""
        malicious = departed in self._bad_departures
        self._bad_departures.discard(departed)
        return self.overlay.join(malicious=malicious).id

    def setup(self) -> List[Node]:
        """引导初始网络并启动所有周期过程"""
        nodes = self.overlay.bootstrap(self.config.overlay.n_nodes, self.malicious_count)
        if self.needs_relays:
            self.anonpath.prefill(nodes)
        for node in nodes:
            self.overlay.start(node)
        self.metrics.start()
        self.churn.start()
        self._ready = True
        return nodes

    def run(self, progress: Optional[ProgressCallback] = None) -> ScenarioResult:
        """运行到配置的时长

        Args:
            progress: 每个指标间隔回调一次 (当前毫秒, 总毫秒)

        Returns:
            ScenarioResult: 指标时间序列、汇总、带宽与跳数统计
        """
        if not self._ready:
            self.setup()
        horizon = int(self.config.engine.horizon_min * 60_000)
        step = self.config.engine.metrics_interval_s * 1000
        events = 0
        log.bind_clock(lambda: self.engine.now)
        try:
            while self.engine.now < horizon:
                events += self.engine.run_until(min(horizon, self.engine.now + step))
                if progress is not None:
                    progress(self.engine.now, horizon)
            if not self.metrics.rows or self.metrics.rows[-1].time_min * 60_000 < horizon:
                self.metrics.sample()
            self.lookups.log_summary()
        finally:
            log.bind_clock(None)
        log.info(
            "Scenario '%s' finished: %d events, %d convictions, %d departures, %d joins",
            self.config.name,
            events,
            len(self.ca.convictions),
            self.overlay.departures,
            self.overlay.joins,
        )
        return ScenarioResult(
            name=self.config.name,
            seed=self.config.engine.seed,
            duration_ms=horizon,
            metrics=list(self.metrics.rows),
            summary=self.metrics.summary(),
            bandwidth=self.ledger.report_rows(horizon, max(1, len(self.membership))),
            hops=self.lookups.stats(),
            events=events,
            trace_digest=self.engine.trace_digest(),
            churn={
                "departures": self.overlay.departures,
                "joins": self.overlay.joins,
                "revocations": self.overlay.revocations,
            },
        )
