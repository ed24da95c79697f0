"""
ringwatch 日志模块
"""
import logging
import logging.handlers
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional, Union

from rich.console import Console
from rich.logging import RichHandler

from .exceptions import LoggingError

if TYPE_CHECKING:
    from ..config import LoggingConfig

ClockFn = Callable[[], int]


class _SimTimeFilter(logging.Filter):
    """给每条记录附加 sim_time 字段（模拟时钟，秒）"""

    def __init__(self) -> None:
        super().__init__()
        self.clock: Optional[ClockFn] = None

    def filter(self, record: logging.LogRecord) -> bool:
        clock = self.clock
        record.sim_time = f"t={clock() / 1000:.3f}s" if clock is not None else "t=-"
        return True


class Logger:
    """日志管理器

    进程内单例。未调用 setup() 时只挂 NullHandler，作为库使用不产生输出；
    CLI 每个命令开始时调用 setup()，把日志写到 stderr 和产物目录下的滚动文件。
    场景运行期间通过 bind_clock() 绑定模拟时钟，文件日志的每一行都带模拟时间。
    """

    _instance: Optional["Logger"] = None
    _initialized: bool = False

    def __new__(cls) -> "Logger":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self) -> None:
        if self._initialized:
            return
        self._logger = logging.getLogger("ringwatch")
        self._logger.addHandler(logging.NullHandler())
        self._sim_time = _SimTimeFilter()
        self._logger.addFilter(self._sim_time)
        self._console = Console(stderr=True)
        self._file_handler: Optional[logging.Handler] = None
        self._console_handler: Optional[logging.Handler] = None
        self._initialized = True

    def set_level(self, level: str) -> None:
        """设置日志级别（DEBUG, INFO, WARNING, ERROR, CRITICAL）

        Raises:
            LoggingError: 级别名无效
        """
        level_num = getattr(logging, str(level).upper(), None)
        if not isinstance(level_num, int):
            raise LoggingError(f"Invalid log level: {level}")
        self._logger.setLevel(level_num)
        if self._console_handler:
            self._console_handler.setLevel(level_num)

    def setup(self, config: "LoggingConfig", log_dir: Optional[Union[str, Path]] = None) -> None:
        """按配置安装处理器

        Args:
            config: 日志配置
            log_dir: 日志文件所在目录（通常是本次运行的产物目录），默认当前目录
        """
        self.teardown()
        try:
            self._logger.setLevel(config.level)
            if config.file:
                log_path = Path(log_dir) if log_dir else Path.cwd()
                log_path.mkdir(parents=True, exist_ok=True)
                self._file_handler = logging.handlers.RotatingFileHandler(
                    log_path / config.file,
                    maxBytes=config.max_size,
                    backupCount=config.backup_count,
                    encoding="utf-8",
                )
                self._file_handler.setFormatter(logging.Formatter(config.format))
                self._logger.addHandler(self._file_handler)

            self._console_handler = RichHandler(
                console=self._console,
                show_time=True,
                show_path=False,
                rich_tracebacks=True,
                tracebacks_show_locals=config.traceback_locals,
            )
            self._console_handler.setLevel(config.level)
            self._logger.addHandler(self._console_handler)
        except Exception as e:
            raise LoggingError(f"Failed to setup logger: {str(e)}")

    def teardown(self) -> None:
        """移除并关闭 setup() 安装的处理器"""
        for handler in (self._file_handler, self._console_handler):
            if handler is not None:
                self._logger.removeHandler(handler)
                handler.close()
        self._file_handler = None
        self._console_handler = None

    def bind_clock(self, clock: Optional[ClockFn]) -> None:
        """绑定（或用 None 解除）模拟时钟，返回毫秒"""
        self._sim_time.clock = clock

    def debug(self, msg: str, *args, **kwargs) -> None:
        self._logger.debug(msg, *args, **kwargs)

    def info(self, msg: str, *args, **kwargs) -> None:
        self._logger.info(msg, *args, **kwargs)

    def warning(self, msg: str, *args, **kwargs) -> None:
        self._logger.warning(msg, *args, **kwargs)

    def error(self, msg: str, *args, **kwargs) -> None:
        self._logger.error(msg, *args, **kwargs)

    def critical(self, msg: str, *args, **kwargs) -> None:
        self._logger.critical(msg, *args, **kwargs)

    def progress(self, msg: str, style: str = "bold green") -> None:
        """在控制台打印一行进度信息（不进日志文件）"""
        self._console.print(f"[{style}]{msg}[/{style}]")

    def error_console(self, msg: str, style: str = "bold red") -> None:
        """在 stderr 打印错误信息"""
        Console(file=sys.stderr).print(f"[{style}]{msg}[/{style}]")


# 全局日志实例
log = Logger()
