from .config_manager import (
    PRESET_DIR,
    AdversaryConfig,
    AnonPathConfig,
    AnonymityConfig,
    BandwidthConfig,
    Behavior,
    ChurnConfig,
    Config,
    ConfigManager,
    DisplayConfig,
    EngineConfig,
    ErrorConfig,
    LatencyMode,
    LoggingConfig,
    OutputConfig,
    OverlayConfig,
    SentinelConfig,
    Transport,
    WorkloadConfig,
    config_fingerprint,
    list_presets,
)

__all__ = [
    "PRESET_DIR",
    "AdversaryConfig",
    "AnonPathConfig",
    "AnonymityConfig",
    "BandwidthConfig",
    "Behavior",
    "ChurnConfig",
    "Config",
    "ConfigManager",
    "DisplayConfig",
    "EngineConfig",
    "ErrorConfig",
    "LatencyMode",
    "LoggingConfig",
    "OutputConfig",
    "OverlayConfig",
    "SentinelConfig",
    "Transport",
    "WorkloadConfig",
    "config_fingerprint",
    "list_presets",
]
