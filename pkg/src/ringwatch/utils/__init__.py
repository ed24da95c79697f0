from .exceptions import (
    AdjudicationError,
    AnalysisError,
    ArtifactError,
    CompareError,
    ConfigError,
    ConfigMismatchError,
    DisplayError,
    LatencyMatrixError,
    LoggingError,
    LookupFailure,
    PathSetError,
    PresimError,
    RingError,
    RingwatchError,
    ScheduleError,
    SignatureError,
    ValidationError,
    WalkError,
)
from .logger import log

__all__ = [
    "AdjudicationError",
    "AnalysisError",
    "ArtifactError",
    "CompareError",
    "ConfigError",
    "ConfigMismatchError",
    "DisplayError",
    "LatencyMatrixError",
    "LoggingError",
    "LookupFailure",
    "PathSetError",
    "PresimError",
    "RingError",
    "RingwatchError",
    "ScheduleError",
    "SignatureError",
    "ValidationError",
    "WalkError",
    "log",
]
