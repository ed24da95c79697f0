"""
安全指标模块

按指标间隔采样：剩余恶意节点比例、误判/漏判/误报率、CA 消息速率以及被偏置的查找。
"""
from collections import Counter
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Dict, List, Optional

from .lookup import LookupRecord, LookupStatus
from .sentinel import Mechanism, MisbehaviorReport, Verdict

if TYPE_CHECKING:
    from .lookup import LookupService
    from .overlay import Overlay
    from .sentinel import CertificateAuthority, Sentinel


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass
class SecurityMetrics:
    """某一时刻的安全指标"""
    time_min: float
    alive: int
    malicious_alive: int
    remaining_fraction: float
    remaining_misbehaving_fraction: float
    convictions: int
    honest_convictions: int
    false_positive_rate: float
    false_negative_neighbor: float
    false_negative_finger: float
    false_negative_secure_update: float
    false_alarm_rate: float
    false_alarm_neighbor: float
    false_alarm_finger: float
    false_alarm_secure_update: float
    false_alarm_dos: float
    reports: int
    rejected_reports: int
    ca_msgs_per_sec: float
    convicted_neighbor: int
    convicted_finger: int
    convicted_secure_update: int
    convicted_dos: int
    lookups: int
    biased_lookups: int
    biased_fraction: float

    def as_row(self) -> Dict[str, object]:
        row = asdict(self)
        for key, value in row.items():
            if isinstance(value, float):
                row[key] = round(value, 6)
        return row


class MetricsRecorder:
    """挂接在 CA 与查找服务上的指标采集器

    Args:
        overlay: 覆盖网络
        ca: 证书中心
        sentinel: 监视服务（可为空）
        lookups: 查找服务（可为空）
        interval_ms: 采样间隔
    """

    def __init__(
        self,
        overlay: "Overlay",
        ca: "CertificateAuthority",
        sentinel: Optional["Sentinel"] = None,
        lookups: Optional["LookupService"] = None,
        interval_ms: int = 60_000,
    ):
        self.overlay = overlay
        self.ca = ca
        self.sentinel = sentinel
        self.interval_ms = interval_ms
        self.rows: List[SecurityMetrics] = []
        self.verdicts: Counter = Counter()
        self.false_alarms: Counter = Counter()
        self.rejected = 0
        self.honest_convictions = 0
        self._window_msgs = 0
        self._window_lookups = 0
        self._window_biased = 0
        self._window_start = overlay.engine.now
        ca.on_verdict.append(self._on_verdict)
        if lookups is not None:
            lookups.on_complete.append(self._on_lookup)

    def _on_verdict(self, report: MisbehaviorReport, verdict: Verdict) -> None:
        self._window_msgs += verdict.messages_processed
        if verdict.rejected:
            self.rejected += 1
            return
        self.verdicts[report.mechanism] += 1
        if verdict.convicted is None:
            self.false_alarms[report.mechanism] += 1
            return
        adv = self.overlay.adversary
        if adv is None or not adv.is_malicious(verdict.convicted):
            self.honest_convictions += 1

    def _on_lookup(self, record: LookupRecord) -> None:
        self._window_lookups += 1
        if record.status is LookupStatus.BIASED:
            self._window_biased += 1

    def start(self) -> None:
        """记录 t=0 的快照并开始周期采样"""
        self.sample()
        self.overlay.engine.every(self.interval_ms, self.sample)

    def snapshot(self) -> SecurityMetrics:
        ov = self.overlay
        adv = ov.adversary
        alive = len(ov.membership)
        malicious_alive = 0
        if adv is not None:
            malicious_alive = sum(1 for n in ov.membership.ids if adv.is_malicious(n))
        misbehaving = malicious_alive if adv is not None and adv.misbehaving else 0
        by_mech = self.ca.convictions_by_mechanism()
        stats = self.sentinel.stats if self.sentinel is not None else {}

        def fn(mech: Mechanism) -> float:
            s = stats.get(mech)
            return s.false_negative_rate if s is not None else 0.0

        def fa(mech: Mechanism) -> float:
            return _ratio(self.false_alarms[mech], self.verdicts[mech])

        now = ov.engine.now
        elapsed_s = max(now - self._window_start, 1) / 1000.0
        convictions = len(self.ca.convictions)
        return SecurityMetrics(
            time_min=now / 60_000.0,
            alive=alive,
            malicious_alive=malicious_alive,
            remaining_fraction=_ratio(malicious_alive, alive),
            remaining_misbehaving_fraction=_ratio(misbehaving, alive),
            convictions=convictions,
            honest_convictions=self.honest_convictions,
            false_positive_rate=_ratio(self.honest_convictions, convictions),
            false_negative_neighbor=fn(Mechanism.NEIGHBOR),
            false_negative_finger=fn(Mechanism.FINGER),
            false_negative_secure_update=fn(Mechanism.SECURE_UPDATE),
            false_alarm_rate=_ratio(sum(self.false_alarms.values()), sum(self.verdicts.values())),
            false_alarm_neighbor=fa(Mechanism.NEIGHBOR),
            false_alarm_finger=fa(Mechanism.FINGER),
            false_alarm_secure_update=fa(Mechanism.SECURE_UPDATE),
            false_alarm_dos=fa(Mechanism.DOS),
            reports=len(self.ca.reports),
            rejected_reports=self.rejected,
            ca_msgs_per_sec=self._window_msgs / elapsed_s if now > self._window_start else 0.0,
            convicted_neighbor=by_mech.get(Mechanism.NEIGHBOR, 0),
            convicted_finger=by_mech.get(Mechanism.FINGER, 0),
            convicted_secure_update=by_mech.get(Mechanism.SECURE_UPDATE, 0),
            convicted_dos=by_mech.get(Mechanism.DOS, 0),
            lookups=self._window_lookups,
            biased_lookups=self._window_biased,
            biased_fraction=_ratio(self._window_biased, self._window_lookups),
        )

    def sample(self) -> SecurityMetrics:
        """采样一行并开启新的窗口"""
        row = self.snapshot()
        self.rows.append(row)
        self._window_msgs = 0
        self._window_lookups = 0
        self._window_biased = 0
        self._window_start = self.overlay.engine.now
        return row

    def peak_ca_rate(self) -> float:
        return max((r.ca_msgs_per_sec for r in self.rows), default=0.0)

    def summary(self) -> Dict[str, object]:
        """整次运行的汇总（逐次测试的漏判率与累计误报率）"""
        last = self.rows[-1] if self.rows else self.snapshot()
        out: Dict[str, object] = {
            "remaining_fraction": round(last.remaining_fraction, 6),
            "convictions": last.convictions,
            "honest_convictions": self.honest_convictions,
            "reports": last.reports,
            "rejected_reports": self.rejected,
            "peak_ca_msgs_per_sec": round(self.peak_ca_rate(), 6),
        }
        if self.sentinel is not None:
            for mech, s in self.sentinel.stats.items():
                out[f"{mech.value}_tests"] = s.tests
                out[f"{mech.value}_false_negative"] = round(s.false_negative_rate, 6)
                out[f"{mech.value}_false_alarm"] = round(_ratio(self.false_alarms[mech], self.verdicts[mech]), 6)
        return out
