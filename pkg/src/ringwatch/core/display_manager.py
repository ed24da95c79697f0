"""
显示管理模块
"""
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence

from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn, TimeRemainingColumn
from rich.table import Table

from ..config import DisplayConfig
from ..utils import DisplayError

AdvanceFn = Callable[[float], None]


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


class DisplayManager:
    """显示管理器

    运行场景时显示模拟分钟进度，预模拟与试验时显示完成数，最后打印汇总表。

    Args:
        config: 显示配置
        console: 指定控制台（测试用），默认新建
    """

    def __init__(self, config: DisplayConfig, console: Optional[Console] = None):
        self.config = config
        self.console = console or Console()
        self._active: Optional[Progress] = None

    def _progress(self) -> Progress:
        return Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
            TextColumn("{task.completed:.0f}/{task.total:.0f}"),
            TimeElapsedColumn(),
            TimeRemainingColumn(),
            console=self.console,
            refresh_per_second=self.config.refresh_rate,
            transient=True,
        )

    @contextmanager
    def track(self, description: str, total: float) -> Iterator[AdvanceFn]:
        """显示一个进度条，产出推进函数

        Args:
            description: 任务描述
            total: 总量（模拟分钟数或试验数）

        Yields:
            AdvanceFn: 调用 advance(amount) 推进进度
        """
        if not self.config.show_progress:
            yield lambda amount: None
            return
        if self._active is not None:
            raise DisplayError("A progress bar is already active", component="progress")
        progress = self._progress()
        self._active = progress
        task = progress.add_task(description, total=total)
        try:
            with progress:
                yield lambda amount: progress.advance(task, amount)
        finally:
            self._active = None

    @contextmanager
    def track_clock(self, description: str, horizon_ms: int) -> Iterator[Callable[[int, int], None]]:
        """按模拟时间推进的进度条，产出 (当前毫秒, 总毫秒) 回调"""
        with self.track(description, horizon_ms / 60_000) as advance:
            seen = [0]

            def update(now_ms: int, _total: int) -> None:
                advance((now_ms - seen[0]) / 60_000)
                seen[0] = now_ms

            yield update

    def table(self, title: str, rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> Table:
        """由行字典构建汇总表"""
        cols: List[str] = list(columns) if columns is not None else (list(rows[0].keys()) if rows else [])
        table = Table(title=title, show_header=True, header_style="bold magenta", border_style="blue")
        for i, col in enumerate(cols):
            table.add_column(col, style="cyan" if i == 0 else None, justify="left" if i == 0 else "right")
        for row in rows:
            table.add_row(*(_fmt(row.get(c, "")) for c in cols))
        return table

    def show_rows(self, title: str, rows: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> None:
        if self.config.show_summary and rows:
            self.console.print(self.table(title, rows, columns))

    def show_mapping(self, title: str, data: Dict[str, Any]) -> None:
        """两列键值表"""
        if not self.config.show_summary:
            return
        table = Table(title=title, show_header=True, header_style="bold magenta", border_style="blue")
        table.add_column("metric", style="cyan")
        table.add_column("value", justify="right")
        for key, value in data.items():
            table.add_row(key, _fmt(value))
        self.console.print(table)
