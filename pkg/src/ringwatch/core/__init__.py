from .artifacts import ArtifactWriter, CompareReport, compare_runs, load_manifest, read_csv
from .bandwidth import BandwidthLedger, MessageClass, MessageSizes
from .display_manager import DisplayManager
from .engine import Engine
from .error_handler import ErrorCategory, ErrorContext, ErrorHandler, ErrorSeverity
from .latency import LatencyModel
from .lookup import HopStats, LookupService, hop_count_stats
from .metrics import MetricsRecorder, SecurityMetrics
from .overlay import Overlay
from .ring import IdSpace
from .rng import RngStreams
from .scenario import Scenario, ScenarioResult
from .sentinel import CertificateAuthority, Mechanism, Sentinel, Verdict

__all__ = [
    "ArtifactWriter",
    "BandwidthLedger",
    "CertificateAuthority",
    "CompareReport",
    "DisplayManager",
    "Engine",
    "ErrorCategory",
    "ErrorContext",
    "ErrorHandler",
    "ErrorSeverity",
    "HopStats",
    "IdSpace",
    "LatencyModel",
    "LookupService",
    "hop_count_stats",
    "Mechanism",
    "MessageClass",
    "MessageSizes",
    "MetricsRecorder",
    "Overlay",
    "RngStreams",
    "Scenario",
    "ScenarioResult",
    "SecurityMetrics",
    "Sentinel",
    "Verdict",
    "compare_runs",
    "load_manifest",
    "read_csv",
]
