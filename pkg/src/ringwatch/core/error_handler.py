"""
错误处理管理模块
"""
import sys
import traceback
from dataclasses import dataclass
from enum import Enum, auto
from typing import Any, Callable, Dict, List, Optional

from ..config import ErrorConfig
from ..utils import log
from ..utils.exceptions import (
    AdjudicationError,
    AnalysisError,
    ArtifactError,
    CompareError,
    ConfigError,
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


class ErrorSeverity(Enum):
    """错误严重程度"""
    FATAL = auto()  # 终止本次命令
    ERROR = auto()
    WARNING = auto()
    INFO = auto()


class ErrorCategory(Enum):
    """错误类别"""
    CONFIG = auto()  # 配置与输入文件
    SIMULATION = auto()  # 事件引擎、环结构
    PROTOCOL = auto()  # 协议层的意外状态
    ANALYSIS = auto()  # 预模拟与熵估计
    ARTIFACT = auto()  # 产物读写与比较
    SYSTEM = auto()
    UNKNOWN = auto()


_CATEGORIES = (
    ((ConfigError, ValidationError, LatencyMatrixError), ErrorCategory.CONFIG),
    ((ScheduleError, RingError), ErrorCategory.SIMULATION),
    ((SignatureError, LookupFailure, WalkError, PathSetError, AdjudicationError), ErrorCategory.PROTOCOL),
    ((PresimError, AnalysisError), ErrorCategory.ANALYSIS),
    ((ArtifactError, CompareError), ErrorCategory.ARTIFACT),
    ((LoggingError, DisplayError, OSError, MemoryError), ErrorCategory.SYSTEM),
)

EXIT_CODES = {ErrorCategory.CONFIG: 2}


@dataclass
class ErrorContext:
    """错误上下文"""
    error: Exception
    category: ErrorCategory
    severity: ErrorSeverity
    message: str
    details: Optional[str] = None
    source: Optional[str] = None
    traceback: Optional[str] = None
    data: Optional[Dict[str, Any]] = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.category, 1)


class ErrorHandler:
    """错误处理器

    负责分类、判定严重程度、按严重程度记录日志并保留有限的历史，
    同时告诉 CLI 应该以什么退出码结束。

    Args:
        config: 错误处理配置
    """

    def __init__(self, config: ErrorConfig):
        self.config = config
        self._error_handlers: Dict[ErrorCategory, List[Callable[[ErrorContext], bool]]] = {}
        self._error_history: List[ErrorContext] = []

    def handle_error(
        self,
        error: Exception,
        category: Optional[ErrorCategory] = None,
        severity: Optional[ErrorSeverity] = None,
        source: Optional[str] = None,
        data: Optional[Dict[str, Any]] = None,
    ) -> ErrorContext:
        """处理错误

        Args:
            error: 异常对象
            category: 错误类别，不指定则自动判断
            severity: 严重程度，不指定则自动判断
            source: 错误来源（命令名等）
            data: 额外数据

        Returns:
            ErrorContext: 错误上下文（含退出码）
        """
        category = category or self.categorize(error)
        severity = severity or self.determine_severity(error, category)
        context = ErrorContext(
            error=error,
            category=category,
            severity=severity,
            message=str(error),
            details=self._get_error_details(error),
            source=source,
            traceback="".join(traceback.format_exception(type(error), error, error.__traceback__)),
            data=data,
        )

        if self.config.keep_history:
            self._error_history.append(context)
            if len(self._error_history) > self.config.max_history:
                self._error_history.pop(0)

        self._log_error(context)

        for handler in self._error_handlers.get(category, []):
            try:
                handler(context)
            except Exception as e:
                log.error(f"Error handler failed: {str(e)}")

        if severity == ErrorSeverity.FATAL and self.config.exit_on_fatal:
            sys.exit(context.exit_code)
        return context

    def register_handler(self, category: ErrorCategory, handler: Callable[[ErrorContext], bool]) -> None:
        """注册某一类错误的附加处理函数"""
        self._error_handlers.setdefault(category, []).append(handler)

    def get_error_history(
        self,
        category: Optional[ErrorCategory] = None,
        severity: Optional[ErrorSeverity] = None,
        limit: Optional[int] = None,
    ) -> List[ErrorContext]:
        """获取错误历史

        Args:
            category: 过滤的错误类别
            severity: 过滤的严重程度
            limit: 返回的最大数量

        Returns:
            List[ErrorContext]: 错误历史列表
        """
        result = self._error_history
        if category:
            result = [e for e in result if e.category == category]
        if severity:
            result = [e for e in result if e.severity == severity]
        if limit:
            result = result[-limit:]
        return result

    def clear_history(self) -> None:
        self._error_history.clear()

    @staticmethod
    def categorize(error: Exception) -> ErrorCategory:
        """按异常类型分类"""
        for types, category in _CATEGORIES:
            if isinstance(error, types):
                return category
        if isinstance(error, RingwatchError):
            return ErrorCategory.SIMULATION
        return ErrorCategory.UNKNOWN

    @staticmethod
    def determine_severity(error: Exception, category: ErrorCategory) -> ErrorSeverity:
        """判断错误的严重程度

        命令行入口遇到的未处理异常都会终止命令；这里只区分能否继续后续扫描点。
        """
        if category in (ErrorCategory.CONFIG, ErrorCategory.SYSTEM, ErrorCategory.UNKNOWN):
            return ErrorSeverity.FATAL
        if category == ErrorCategory.ARTIFACT and isinstance(error, CompareError):
            return ErrorSeverity.ERROR
        if category == ErrorCategory.PROTOCOL:
            return ErrorSeverity.WARNING
        return ErrorSeverity.ERROR

    @staticmethod
    def _get_error_details(error: Exception) -> Optional[str]:
        details = getattr(error, "details", None)
        if details:
            return str(details)
        if error.__cause__ is not None:
            return f"Caused by: {str(error.__cause__)}"
        return None

    def _log_error(self, context: ErrorContext) -> None:
        if context.severity == ErrorSeverity.FATAL:
            log_func = log.critical
        elif context.severity == ErrorSeverity.ERROR:
            log_func = log.error
        elif context.severity == ErrorSeverity.WARNING:
            log_func = log.warning
        else:
            log_func = log.info

        log_func(f"[{context.category.name}] {context.message}")
        if context.details and self.config.log_details:
            log.debug(f"Details: {context.details}")
        if context.source:
            log.debug(f"Source: {context.source}")
        if context.traceback and self.config.log_traceback:
            log.debug(f"Traceback:\n{context.traceback}")
