import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from ruamel.yaml import YAML

from ..utils.exceptions import ConfigError


class StrictModel(BaseModel):
    """拒绝未知字段的基础模型"""
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class LatencyMode(str, Enum):
    """延迟模型"""
    SYNTHETIC = "synthetic"
    MATRIX = "matrix"


class Behavior(str, Enum):
    """恶意节点行为"""
    BIAS = "bias"
    MISDIRECT = "misdirect"
    POLLUTE_SUCCESSORS = "pollute_successors"
    POLLUTE_FINGERS = "pollute_fingers"
    SELECTIVE_DOS = "selective_dos"
    PASSIVE_OBSERVE = "passive_observe"
    BIAS_WALK = "bias_walk"


class Transport(str, Enum):
    """查询传输方式"""
    DIRECT = "direct"
    ANON = "anon"


class EngineConfig(StrictModel):
    """模拟引擎配置"""
    seed: int = Field(default=1, ge=0, description="根随机种子")
    horizon_min: float = Field(default=60.0, gt=0, description="模拟时长（分钟）")
    metrics_interval_s: int = Field(default=60, gt=0, description="指标采样间隔（秒）")
    latency_mode: LatencyMode = Field(default=LatencyMode.SYNTHETIC, description="延迟模型")
    latency_matrix: Optional[str] = Field(default=None, description="延迟矩阵CSV路径（毫秒）")
    latency_median_ms: float = Field(default=80.0, gt=0, description="对数正态延迟中位数")
    latency_sigma: float = Field(default=0.5, ge=0, description="对数正态延迟σ")
    jitter: bool = Field(default=True, description="是否启用抖动")
    jitter_max_ms: int = Field(default=10, ge=0, description="抖动窗口上限（毫秒）")
    jitter_fraction: float = Field(default=0.1, ge=0, le=1, description="抖动窗口占平均延迟比例")
    timeout_factor: float = Field(default=4.0, gt=0, description="超时 = 因子 × 单程延迟估计")
    timeout_floor_ms: int = Field(default=2000, gt=0, description="超时下限（毫秒）")

    @model_validator(mode="after")
    def check_matrix(self) -> "EngineConfig":
        if self.latency_mode == LatencyMode.MATRIX and not self.latency_matrix:
            raise ValueError("latency_matrix is required when latency_mode is 'matrix'")
        return self


class OverlayConfig(StrictModel):
    """覆盖网络配置"""
    n_nodes: int = Field(default=1000, ge=1, description="节点数量")
    id_bits: int = Field(default=32, ge=2, le=62, description="标识环位宽 m")
    fingers: int = Field(default=12, ge=1, description="指针表大小 F")
    successors: int = Field(default=6, ge=1, description="后继/前驱列表长度 S")
    proof_queue: int = Field(default=6, ge=1, description="证明队列长度 Q")
    stabilize_interval_s: float = Field(default=2.0, gt=0, description="稳定化间隔（秒）")
    finger_interval_s: float = Field(default=30.0, gt=0, description="指针更新间隔（秒）")
    fingers_per_refresh: int = Field(default=1, ge=1, description="每次指针更新轮转刷新的指针数")
    kept_tables: int = Field(default=16, ge=1, description="保留的外部路由表数量")
    converged_start: bool = Field(default=True, description="是否从收敛状态启动")

    @model_validator(mode="after")
    def check_fingers(self) -> "OverlayConfig":
        if self.fingers > self.id_bits:
            raise ValueError("fingers must not exceed id_bits")
        if self.n_nodes > 2 ** self.id_bits:
            raise ValueError("n_nodes exceeds the identifier space")
        return self


class ChurnConfig(StrictModel):
    """节点流失配置"""
    mean_lifetime_min: Optional[float] = Field(default=None, gt=0, description="平均寿命（分钟），为空表示静态网络")
    rejoin: bool = Field(default=True, description="离开后是否补充新节点")
    tick_s: float = Field(default=1.0, gt=0, description="流失处理粒度（秒）")


class AdversaryConfig(StrictModel):
    """攻击者配置"""
    fraction: float = Field(default=0.2, ge=0, lt=1, description="恶意节点比例 f")
    attack_rate: float = Field(default=1.0, ge=0, le=1, description="每次机会作恶的概率")
    succ_manip_rate: float = Field(default=0.5, ge=0, le=1, description="被检查的恶意前驱撒谎概率")
    behaviors: List[Behavior] = Field(default_factory=list, description="启用的恶意行为")
    cover_window_s: float = Field(default=15.0, gt=0, description="合谋掩护信息的有效期（秒）")


class SentinelConfig(StrictModel):
    """检测机制配置"""
    neighbor_surveillance: bool = Field(default=True, description="秘密邻居监视")
    finger_surveillance: bool = Field(default=True, description="秘密指针监视")
    secure_finger_update: bool = Field(default=True, description="安全指针更新")
    dos_defense: bool = Field(default=True, description="回执/见证人机制")
    check_interval_max_s: float = Field(default=60.0, gt=0, description="邻居检查间隔上限 T_m（秒）")
    finger_check_interval_s: float = Field(default=60.0, gt=0, description="指针检查间隔（秒）")
    check_delay_min_s: float = Field(default=1.0, ge=0, description="指针检查随机等待下限（秒）")
    check_delay_max_s: float = Field(default=10.0, ge=0, description="指针检查随机等待上限（秒）")
    kept_table_max_age_s: float = Field(default=300.0, gt=0, description="指针检查选用的外部路由表最大年龄（秒）")
    predecessor_grace_s: float = Field(default=30.0, ge=0, description="核查前驱列表时不计入的新加入节点窗口（秒）")
    receipt_margin_ms: int = Field(default=200, ge=0, description="回执截止前的余量（毫秒）")

    @model_validator(mode="after")
    def check_delay_bounds(self) -> "SentinelConfig":
        if self.check_delay_max_s < self.check_delay_min_s:
            raise ValueError("check_delay_max_s must be >= check_delay_min_s")
        return self


class AnonPathConfig(StrictModel):
    """匿名路径配置"""
    walk_length: Optional[int] = Field(default=None, ge=1, description="随机游走每阶段长度 l，为空取 ceil(log2 N)")
    walk_retries: int = Field(default=3, ge=0, description="游走阶段重试次数")
    walk_interval_s: float = Field(default=60.0, gt=0, description="后台游走间隔（秒）")
    pool_size: int = Field(default=24, ge=2, description="中继对池容量")
    k_dummy: int = Field(default=6, ge=0, description="每次查找的伪查询数")
    relay_delay_max_ms: int = Field(default=100, ge=0, description="中间中继 B 的最大随机延迟 D_max")
    multipath: bool = Field(default=True, description="是否为每个查询使用独立出口中继对")


class WorkloadConfig(StrictModel):
    """查找负载配置"""
    lookups: bool = Field(default=True, description="是否产生周期性查找")
    lookup_period_s: float = Field(default=60.0, gt=0, description="每个节点的查找周期（秒）")
    transport: Transport = Field(default=Transport.DIRECT, description="普通查找的传输方式")


class AnonymityConfig(StrictModel):
    """匿名性分析配置"""
    n_nodes: int = Field(default=10000, ge=2, description="静态快照节点数")
    fraction: float = Field(default=0.2, ge=0, lt=1, description="恶意节点比例 f")
    concurrent_rate: float = Field(default=0.01, gt=0, le=1, description="并发查找率 a")
    k_dummy: int = Field(default=6, ge=0, description="每次查找的伪查询数")
    trials: int = Field(default=1000, ge=1, description="蒙特卡洛试验次数")
    presim_lookups: int = Field(default=100000, ge=1, description="预模拟查找次数")
    fingers: Optional[int] = Field(default=None, ge=1, description="指针表大小，为空取 ceil(log2 N)")
    successors: int = Field(default=6, ge=1, description="后继列表长度")
    id_bits: int = Field(default=32, ge=2, le=62, description="标识环位宽")
    walk_length: Optional[int] = Field(default=None, ge=1, description="随机游走长度，为空取 ceil(log2 N)")
    subset_cap: int = Field(default=20, ge=1, description="子集枚举上限")
    subset_samples: int = Field(default=4096, ge=1, description="超过上限时抽样的子集数")
    multipath: bool = Field(default=True, description="多路径（否则共享单一出口对）")
    gamma_position_bins: int = Field(default=24, ge=1, description="γ 位置轴对数分箱数")
    presim_path: Optional[str] = Field(default=None, description="预模拟表文件")
    timing_trials: int = Field(default=2000, ge=1, description="时序攻击试验次数")
    relay_delay_max_ms: int = Field(default=100, ge=0, description="时序分析中的 D_max")
    timing_window_ms: int = Field(default=1000, ge=1, description="时序分析中并发传输的发送时间窗口")
    k_dummy_sweep: List[int] = Field(default_factory=list, description="按伪查询数扫描，非空时覆盖 k_dummy")

    @property
    def concurrent_lookups(self) -> int:
        return max(1, math.ceil(self.concurrent_rate * self.n_nodes))

    @property
    def effective_fingers(self) -> int:
        return self.fingers or max(1, min(self.id_bits, math.ceil(math.log2(self.n_nodes))))

    @property
    def effective_walk_length(self) -> int:
        return self.walk_length or max(1, math.ceil(math.log2(self.n_nodes)))


class BandwidthConfig(StrictModel):
    """带宽统计常量（字节）"""
    enabled: bool = Field(default=True, description="是否记录带宽")
    item_bytes: int = Field(default=10, ge=0, description="每个路由项")
    signature_bytes: int = Field(default=40, ge=0, description="签名")
    timestamp_bytes: int = Field(default=4, ge=0, description="时间戳")
    certificate_bytes: int = Field(default=50, ge=0, description="证书")
    onion_layer_bytes: int = Field(default=16, ge=0, description="每层洋葱封装开销（AES-128 分组）")
    header_bytes: int = Field(default=10, ge=0, description="请求头（一个路由项）")


class OutputConfig(StrictModel):
    """输出配置"""
    out_dir: str = Field(default="runs/latest", description="产物目录")
    schema_version: int = Field(default=1, ge=1, description="CSV 模式版本")
    write_lookups: bool = Field(default=True, description="是否输出查找跳数直方图")


class LoggingConfig(StrictModel):
    """日志配置模型"""
    level: str = Field(default="INFO")
    format: str = Field(default="%(asctime)s - %(name)s - %(levelname)s - [%(sim_time)s] %(message)s")
    file: Optional[str] = Field(default="ringwatch.log")
    max_size: int = Field(default=10485760)
    backup_count: int = Field(default=5)
    traceback_locals: bool = Field(default=False)

    @field_validator("level")
    @classmethod
    def validate_level(cls, v: str) -> str:
        """验证日志级别"""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Invalid log level. Must be one of {valid_levels}")
        return v.upper()


class DisplayConfig(StrictModel):
    """显示配置模型"""
    show_progress: bool = Field(default=True, description="是否显示进度条")
    show_summary: bool = Field(default=True, description="是否显示结果汇总表")
    refresh_rate: float = Field(default=4.0, gt=0, description="每秒刷新次数")


class ErrorConfig(StrictModel):
    """错误处理配置"""
    exit_on_fatal: bool = Field(default=True, description="遇到致命错误时是否退出")
    keep_history: bool = Field(default=True, description="是否保留错误历史")
    max_history: int = Field(default=100, ge=1, description="错误历史上限")
    log_details: bool = Field(default=True, description="是否在调试日志中记录错误详情")
    log_traceback: bool = Field(default=False, description="是否在调试日志中记录堆栈")


class Config(StrictModel):
    """主配置模型"""
    name: str = Field(default="default", description="场景名称")
    engine: EngineConfig = Field(default_factory=EngineConfig)
    overlay: OverlayConfig = Field(default_factory=OverlayConfig)
    churn: ChurnConfig = Field(default_factory=ChurnConfig)
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)
    sentinel: SentinelConfig = Field(default_factory=SentinelConfig)
    anonpath: AnonPathConfig = Field(default_factory=AnonPathConfig)
    workload: WorkloadConfig = Field(default_factory=WorkloadConfig)
    anonymity: AnonymityConfig = Field(default_factory=AnonymityConfig)
    bandwidth: BandwidthConfig = Field(default_factory=BandwidthConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    display: DisplayConfig = Field(default_factory=DisplayConfig)
    error: ErrorConfig = Field(default_factory=ErrorConfig)

    @property
    def walk_length(self) -> int:
        if self.anonpath.walk_length:
            return self.anonpath.walk_length
        return max(1, math.ceil(math.log2(max(2, self.overlay.n_nodes))))


PRESET_DIR = Path(__file__).parent / "presets"


def list_presets() -> List[str]:
    """列出内置预设名称（以下划线开头的文件是被包含的片段）"""
    return sorted(p.stem for p in PRESET_DIR.glob("*.yaml") if not p.stem.startswith("_"))


def config_fingerprint(config: Config) -> str:
    """配置指纹：去掉种子与输出位置后的规范 JSON 的 SHA-256"""
    data = config.model_dump(mode="json")
    data["engine"].pop("seed", None)
    data.pop("output", None)
    data.pop("logging", None)
    data.pop("display", None)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ConfigManager:
    """配置管理器

    加载顺序：内置默认配置 → 预设（可选）→ 用户配置文件（可选）→ 命令行覆盖。
    每一层都可以用 ``include`` 引入其他 YAML 文件。
    """
    def __init__(self, config_path: Optional[Union[str, Path]] = None, preset: Optional[str] = None):
        self._config: Optional[Config] = None
        self._config_path = Path(config_path) if config_path else None
        self._preset = preset
        self._default_config_path = Path(__file__).parent / "default_config.yaml"

    @property
    def preset(self) -> Optional[str]:
        return self._preset

    @property
    def loaded(self) -> bool:
        return self._config is not None

    def load(self) -> Config:
        """加载配置"""
        merged = self._load_layered(self._default_config_path)

        if self._preset:
            preset_path = PRESET_DIR / f"{self._preset}.yaml"
            if not preset_path.exists():
                raise ConfigError(
                    f"Unknown preset '{self._preset}'",
                    key="preset",
                    details={"available": list_presets()},
                )
            merged = self._merge_configs(merged, self._load_layered(preset_path))

        if self._config_path:
            if not self._config_path.exists():
                raise ConfigError(f"Config file not found: {self._config_path}")
            merged = self._merge_configs(merged, self._load_layered(self._config_path))

        self._config = self._build(merged)
        return self._config

    @property
    def config(self) -> Config:
        """获取配置对象"""
        if self._config is None:
            self.load()
        return self._config

    @staticmethod
    def _build(data: Dict[str, Any]) -> Config:
        try:
            return Config(**data)
        except ValidationError as e:
            first = e.errors()[0]
            key = ".".join(str(part) for part in first["loc"])
            raise ConfigError(f"Invalid config key '{key}': {first['msg']}", key=key, details=e.errors())

    @staticmethod
    def _yaml() -> YAML:
        yaml = YAML(typ="safe")
        yaml.allow_unicode = True
        yaml.default_flow_style = False
        yaml.sort_keys = False
        yaml.indent(mapping=2, sequence=4, offset=2)
        return yaml

    @classmethod
    def _load_yaml(cls, path: Path) -> Dict[str, Any]:
        """加载YAML文件"""
        try:
            with path.open("r", encoding="utf-8") as f:
                data = cls._yaml().load(f)
        except Exception as e:
            raise ConfigError(f"Failed to load config file {path}: {str(e)}")
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must contain a mapping")
        return data

    @classmethod
    def _load_layered(cls, path: Path, _stack: Optional[List[Path]] = None) -> Dict[str, Any]:
        """加载文件并递归展开 include（被包含文件先合并，当前文件覆盖其上）"""
        stack = _stack or []
        resolved = path.resolve()
        if resolved in stack:
            chain = " -> ".join(str(p) for p in stack + [resolved])
            raise ConfigError(f"Include cycle detected: {chain}", key="include")

        data = cls._load_yaml(path)
        includes = data.pop("include", None) or []
        if isinstance(includes, str):
            includes = [includes]

        result: Dict[str, Any] = {}
        for item in includes:
            inc_path = (path.parent / item) if not Path(item).is_absolute() else Path(item)
            if not inc_path.exists():
                raise ConfigError(f"Included file not found: {inc_path}", key="include")
            result = cls._merge_configs(result, cls._load_layered(inc_path, stack + [resolved]))
        return cls._merge_configs(result, data)

    @staticmethod
    def _merge_configs(default: Dict[str, Any], user: Dict[str, Any]) -> Dict[str, Any]:
        """递归合并配置"""
        result = default.copy()
        for key, value in user.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = ConfigManager._merge_configs(result[key], value)
            else:
                result[key] = value
        return result

    def update(self, config_dict: Dict[str, Any]) -> Config:
        """合并覆盖项并重新校验"""
        if self._config is None:
            self.load()
        merged = self._merge_configs(self._config.model_dump(mode="json"), config_dict)
        self._config = self._build(merged)
        return self._config

    def export_config(self, path: Union[str, Path]) -> None:
        """导出配置到文件

        Args:
            path: 导出文件路径
        """
        if self._config is None:
            self.load()
        save_path = Path(path)
        try:
            save_path.parent.mkdir(parents=True, exist_ok=True)
            yaml = YAML()
            yaml.allow_unicode = True
            yaml.default_flow_style = False
            yaml.indent(mapping=2, sequence=4, offset=2)
            with save_path.open("w", encoding="utf-8") as f:
                yaml.dump(self._config.model_dump(mode="json"), f)
        except OSError as e:
            raise ConfigError(f"Failed to export config file {path}: {str(e)}")
