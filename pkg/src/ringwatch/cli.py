"""
命令行界面模块
"""
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import numpy as np
from dotenv import load_dotenv
from rich.console import Console

from . import __version__
from .analysis import (
    PresimTables,
    StaticRing,
    build_ring,
    dummy_sweep,
    presim_fingerprint,
    presimulate,
    run_trials,
    timing_attack,
)
from .config import Config, ConfigManager, ErrorConfig, list_presets
from .core import (
    ArtifactWriter,
    DisplayManager,
    ErrorHandler,
    LatencyModel,
    RngStreams,
    Scenario,
    ScenarioResult,
    compare_runs,
)
from .utils import RingwatchError, log

console = Console()

FULL_SCALE_NODES = 100_000


def _fail(ctx: click.Context, error: Exception, source: str) -> None:
    """交给 ErrorHandler 记录并按类别退出"""
    manager: Optional[ConfigManager] = ctx.obj.get("config") if ctx.obj else None
    err_config = ErrorConfig(exit_on_fatal=False)
    if manager is not None and manager.loaded:
        err_config = manager.config.error.model_copy(update={"exit_on_fatal": False})
    context = ErrorHandler(err_config).handle_error(error, source=source)
    log.error_console(f"{source} failed: {context.message}")
    ctx.exit(context.exit_code)


def _overrides(
    seed: Optional[int] = None,
    out: Optional[str] = None,
    trials: Optional[int] = None,
    horizon_min: Optional[float] = None,
) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    if seed is not None:
        data.setdefault("engine", {})["seed"] = seed
    if horizon_min is not None:
        data.setdefault("engine", {})["horizon_min"] = horizon_min
    if out is not None:
        data.setdefault("output", {})["out_dir"] = out
    if trials is not None:
        data.setdefault("anonymity", {})["trials"] = trials
    return data


def _prepare(ctx: click.Context, **overrides: Any) -> Tuple[Config, ArtifactWriter, DisplayManager]:
    """应用覆盖项、在产物目录中启用日志文件，返回 (配置, 产物写入器, 显示)"""
    manager: ConfigManager = ctx.obj["config"]
    config = manager.update(_overrides(**overrides))
    out_dir = Path(config.output.out_dir)
    log.setup(config.logging, out_dir)
    log.set_level(ctx.obj["level"])
    writer = ArtifactWriter(out_dir, config, preset=manager.preset)
    writer.write_config()
    return config, writer, DisplayManager(config.display)


common_options = [
    click.option("--seed", type=int, help="根随机种子"),
    click.option("-o", "--out", type=click.Path(file_okay=False), help="产物目录"),
]


def with_common(func: Any) -> Any:
    for option in reversed(common_options):
        func = option(func)
    return func


@click.group()
@click.version_option(__version__)
@click.option("-c", "--config", type=click.Path(exists=True, dir_okay=False), help="配置文件路径")
@click.option("-p", "--preset", help="内置预设名称（见 ringwatch presets）")
@click.option("-v", "--verbose", is_flag=True, help="显示详细日志")
@click.option("-q", "--quiet", is_flag=True, help="只显示错误日志")
@click.pass_context
def cli(ctx: click.Context, config: Optional[str], preset: Optional[str], verbose: bool, quiet: bool) -> None:
    """ringwatch：结构化覆盖网络的安全查找模拟与匿名性分析

    在事件驱动模拟中运行监视与仲裁机制，并在静态快照上估计匿名查找的熵。
    """
    load_dotenv()
    ctx.ensure_object(dict)
    level = "DEBUG" if verbose else "ERROR" if quiet else os.getenv("RINGWATCH_LOG_LEVEL", "INFO").upper()
    ctx.obj["level"] = level
    log.set_level(level)
    manager = ConfigManager(config, preset=preset)
    ctx.obj["config"] = manager
    try:
        manager.load()
        env_out = os.getenv("RINGWATCH_OUT")
        if env_out:
            manager.update({"output": {"out_dir": env_out}})
    except RingwatchError as e:
        _fail(ctx, e, "config")


# ---- 事件驱动模拟 ----


def _run_scenario(config: Config, display: DisplayManager, label: str) -> ScenarioResult:
    scenario = Scenario(config, record_trace=True)
    horizon = int(config.engine.horizon_min * 60_000)
    with display.track_clock(label, horizon) as update:
        return scenario.run(progress=update)


def _write_scenario(writer: ArtifactWriter, config: Config, result: ScenarioResult, suffix: str = "") -> None:
    writer.write_csv(f"metrics{suffix}.csv", [m.as_row() for m in result.metrics], "metrics")
    writer.write_csv(
        f"summary{suffix}.csv",
        [{"name": result.name, "seed": result.seed, "events": result.events, **result.summary, **result.churn}],
        "summary",
    )
    writer.write_csv(f"bandwidth{suffix}.csv", result.bandwidth, "bandwidth")
    if config.output.write_lookups:
        rows = [{"hops": h, "lookups": c} for h, c in sorted(result.hops.histogram.items())]
        rows.append({"hops": "failed", "lookups": result.hops.failures})
        writer.write_csv(f"hops{suffix}.csv", rows, "hops", columns=["hops", "lookups"])


@cli.command()
@with_common
@click.option("--horizon-min", type=float, help="模拟时长（分钟）")
@click.option("--analysis", is_flag=True, help="同时运行预模拟与熵估计")
@click.pass_context
def run(ctx: click.Context, seed: Optional[int], out: Optional[str], horizon_min: Optional[float], analysis: bool) -> None:
    """运行一个场景并写出指标、带宽与清单"""
    try:
        config, writer, display = _prepare(ctx, seed=seed, out=out, horizon_min=horizon_min)
        result = _run_scenario(config, display, f"{config.name}")
        _write_scenario(writer, config, result)
        notes: Dict[str, Any] = {"trace_digest": result.trace_digest, "events": result.events}
        if analysis:
            notes.update(_entropy(config, writer, display, None))
        writer.write_manifest(**notes)
        display.show_mapping(f"{config.name} summary", dict(result.summary))
    except RingwatchError as e:
        _fail(ctx, e, "run")


@cli.command()
@with_common
@click.option("--horizon-min", type=float, help="模拟时长（分钟）")
@click.option("--lookup-period-min", type=float, multiple=True, help="查找周期（分钟，可多次指定）")
@click.pass_context
def bandwidth(
    ctx: click.Context,
    seed: Optional[int],
    out: Optional[str],
    horizon_min: Optional[float],
    lookup_period_min: Tuple[float, ...],
) -> None:
    """按类别报告每节点的平均带宽（kbps）"""
    try:
        config, writer, display = _prepare(ctx, seed=seed, out=out, horizon_min=horizon_min)
        periods = list(lookup_period_min) or [config.workload.lookup_period_s / 60.0]
        rows: List[Dict[str, Any]] = []
        for period in periods:
            cfg = config.model_copy(deep=True)
            cfg.workload.lookup_period_s = period * 60.0
            result = _run_scenario(cfg, display, f"lookup every {period:g} min")
            rows.extend({"lookup_period_min": period, **row} for row in result.bandwidth)
        writer.write_csv("bandwidth.csv", rows, "bandwidth")
        writer.write_manifest(lookup_periods_min=periods)
        display.show_rows("Bandwidth per node", [r for r in rows if r["message_class"] == "total"])
    except RingwatchError as e:
        _fail(ctx, e, "bandwidth")


# ---- 匿名性分析 ----


def _snapshot(config: Config) -> StaticRing:
    return build_ring(config.anonymity, RngStreams(config.engine.seed)["snapshot"])


def _presim(
    config: Config,
    ring: StaticRing,
    display: DisplayManager,
    k_dummy: int,
    lookups: Optional[int] = None,
) -> PresimTables:
    total = config.anonymity.presim_lookups if lookups is None else lookups
    rng = np.random.default_rng([config.engine.seed, k_dummy])
    with display.track(f"presim k_dummy={k_dummy}", total) as advance:
        return presimulate(ring, config.anonymity, rng, lookups=total, k_dummy=k_dummy, progress=advance)


def _entropy(
    config: Config,
    writer: ArtifactWriter,
    display: DisplayManager,
    presim_path: Optional[str],
) -> Dict[str, Any]:
    anon = config.anonymity
    ring = _snapshot(config)
    path = presim_path or anon.presim_path
    rows: List[Dict[str, Any]] = []
    sources: Dict[str, str] = {}
    for k in dummy_sweep(anon):
        if path:
            tables = PresimTables.load(path, fingerprint=presim_fingerprint(anon, k))
            sources[str(k)] = str(path)
        else:
            tables = _presim(config, ring, display, k)
            sources[str(k)] = "inline"
        rng = np.random.default_rng([config.engine.seed, k, 1])
        with display.track(f"trials k_dummy={k}", anon.trials) as advance:
            result = run_trials(ring, anon, tables, rng, k_dummy=k, progress=advance)
        rows.append({"config": config.name, **result.row()})
    writer.write_csv("entropy.csv", rows, "entropy")
    display.show_rows(
        "Entropy",
        rows,
        ["k_dummy", "h_initiator", "h_initiator_ci", "leak_initiator", "h_target", "h_target_ci", "leak_target", "unlinkability"],
    )
    return {
        "analysis_path": "full" if anon.n_nodes >= FULL_SCALE_NODES else "desk-scale",
        "presim_source": sources,
    }


@cli.command()
@with_common
@click.option("--lookups", type=int, help="预模拟查找次数")
@click.option("--csv/--no-csv", "dump_csv", default=True, help="同时导出 CSV")
@click.pass_context
def presim(ctx: click.Context, seed: Optional[int], out: Optional[str], lookups: Optional[int], dump_csv: bool) -> None:
    """预模拟 ξ、χ、γ 分布并保存为 .npz"""
    try:
        config, writer, display = _prepare(ctx, seed=seed, out=out)
        ring = _snapshot(config)
        saved: List[str] = []
        for k in dummy_sweep(config.anonymity):
            tables = _presim(config, ring, display, k, lookups)
            target = writer.path(f"presim_k{k}.npz")
            writer.add(tables.save(target))
            saved.append(target.name)
            if dump_csv:
                for p in tables.write_csv(writer.out_dir / f"presim_k{k}").values():
                    writer.add(p)
        writer.write_manifest(presim_tables=saved)
        log.progress(f"Presimulation tables: {', '.join(saved)}")
    except RingwatchError as e:
        _fail(ctx, e, "presim")


@cli.command()
@with_common
@click.option("--trials", type=int, help="蒙特卡洛试验次数")
@click.option("--presim", "presim_path", type=click.Path(exists=True, dir_okay=False), help="预模拟表（.npz）")
@click.pass_context
def entropy(
    ctx: click.Context,
    seed: Optional[int],
    out: Optional[str],
    trials: Optional[int],
    presim_path: Optional[str],
) -> None:
    """估计发起者与目标的熵及信息泄露"""
    try:
        config, writer, display = _prepare(ctx, seed=seed, out=out, trials=trials)
        notes = _entropy(config, writer, display, presim_path)
        writer.write_manifest(**notes)
    except RingwatchError as e:
        _fail(ctx, e, "entropy")


@cli.command()
@with_common
@click.option("--trials", type=int, help="时序攻击试验次数")
@click.option("--delay-max-ms", type=int, multiple=True, help="中间中继的最大随机延迟 D_max（可多次指定）")
@click.pass_context
def timing(
    ctx: click.Context,
    seed: Optional[int],
    out: Optional[str],
    trials: Optional[int],
    delay_max_ms: Tuple[int, ...],
) -> None:
    """时序分析攻击的错误率与信息泄露"""
    try:
        config, writer, display = _prepare(ctx, seed=seed, out=out)
        anon = config.anonymity
        latency = LatencyModel.from_config(config.engine)
        count = trials or anon.timing_trials
        rows: List[Dict[str, Any]] = []
        for d_max in delay_max_ms or (anon.relay_delay_max_ms,):
            rng = np.random.default_rng([config.engine.seed, d_max])
            with display.track(f"timing D_max={d_max} ms", count) as advance:
                result = timing_attack(anon, latency, rng, trials=count, relay_delay_max_ms=d_max, progress=advance)
            rows.append(result.row())
        writer.write_csv("timing.csv", rows, "timing")
        writer.write_manifest()
        display.show_rows("Timing attack", rows)
    except RingwatchError as e:
        _fail(ctx, e, "timing")


# ---- 工具命令 ----


@cli.command()
@click.argument("baseline", type=click.Path(exists=True, file_okay=False))
@click.argument("candidate", type=click.Path(exists=True, file_okay=False))
@click.option("--tolerance", type=float, help="数值容差（列出超过容差的差异）")
@click.option("--pattern", multiple=True, help="参与比较的文件模式（默认 *.csv）")
@click.pass_context
def compare(ctx: click.Context, baseline: str, candidate: str, tolerance: Optional[float], pattern: Tuple[str, ...]) -> None:
    """比较两个产物目录（同种子逐字节，不同种子比较置信区间）"""
    try:
        report = compare_runs(baseline, candidate, tolerance=tolerance, patterns=pattern or ("*.csv",))
    except RingwatchError as e:
        _fail(ctx, e, "compare")
        return
    for line in report.lines():
        console.print(line)
    if report.identical:
        console.print("[green]runs agree[/]")
    else:
        console.print("[red]runs diverge[/]")
        ctx.exit(1)


@cli.command()
@click.option("-o", "--output", type=click.Path(dir_okay=False), default="ringwatch.yaml", show_default=True, help="输出配置文件路径")
@click.pass_context
def init(ctx: click.Context, output: str) -> None:
    """导出当前生效的配置（默认值、预设与配置文件合并后）"""
    try:
        ctx.obj["config"].export_config(output)
        console.print(f"[green]Config written to {output}[/]")
    except RingwatchError as e:
        _fail(ctx, e, "init")


@cli.command()
def presets() -> None:
    """列出内置预设"""
    for name in list_presets():
        console.print(name)


def main() -> None:
    """主入口函数"""
    cli()
