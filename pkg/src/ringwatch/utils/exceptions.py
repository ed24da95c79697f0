"""
ringwatch 异常模块
"""
from typing import Any, Optional


class RingwatchError(Exception):
    """ringwatch 基础异常类"""
    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(message)
        self.details = details


class ConfigError(RingwatchError):
    """配置相关错误"""
    def __init__(self, message: str, key: Optional[str] = None, details: Optional[Any] = None):
        super().__init__(message, details)
        self.key = key


class ScheduleError(RingwatchError):
    """事件调度错误（例如调度到过去的时间）"""
    pass


class LatencyMatrixError(RingwatchError):
    """延迟矩阵加载或校验错误"""
    pass


class RingError(RingwatchError):
    """标识环运算错误（例如指针索引越界）"""
    pass


class SignatureError(RingwatchError):
    """签名校验错误"""
    pass


class LookupFailure(RingwatchError):
    """查找过程错误"""
    pass


class WalkError(RingwatchError):
    """随机游走错误"""
    pass


class PathSetError(RingwatchError):
    """匿名路径构造错误"""
    pass


class AdjudicationError(RingwatchError):
    """CA 裁决错误"""
    pass


class PresimError(RingwatchError):
    """预模拟表缺失或损坏"""
    pass


class AnalysisError(RingwatchError):
    """匿名性分析错误"""
    pass


class ArtifactError(RingwatchError):
    """输出产物（CSV、清单）读写错误"""
    pass


class CompareError(RingwatchError):
    """运行结果比较错误"""
    pass


class ConfigMismatchError(CompareError):
    """两个运行的配置指纹不一致"""
    def __init__(self, message: str, baseline: Optional[str] = None, candidate: Optional[str] = None):
        super().__init__(message, details={"baseline": baseline, "candidate": candidate})
        self.baseline = baseline
        self.candidate = candidate


class ValidationError(RingwatchError):
    """数据验证相关错误"""
    def __init__(self, message: str, field: Optional[str] = None, value: Optional[Any] = None):
        super().__init__(message)
        self.field = field
        self.value = value


class LoggingError(RingwatchError):
    """日志相关错误"""
    pass


class DisplayError(RingwatchError):
    """显示相关错误"""
    def __init__(self, message: str, component: Optional[str] = None):
        super().__init__(message)
        self.component = component
