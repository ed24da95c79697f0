"""
产物目录模块

- 带模式注释行的 CSV（首行 `# schema: <id>/v<版本>`）；
- manifest.yaml：种子、配置指纹、版本信息、预设名、分析路径与各文件的 SHA-256；
- compare_runs：同种子逐字节比较，不同种子按列比较 95% 置信区间是否重叠，
  给定容差时用 DeepDiff 列出具体差异。
"""
import csv
import hashlib
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy
from deepdiff import DeepDiff
from pathspec import PathSpec
from pathspec.patterns import GitWildMatchPattern
from ruamel.yaml import YAML

from .. import __version__
from ..config import Config, config_fingerprint
from ..utils import log
from ..utils.exceptions import ArtifactError, CompareError, ConfigMismatchError
from ..utils.stats import intervals_overlap, mean_ci

MANIFEST = "manifest.yaml"
SCHEMA_PREFIX = "# schema: "
DEFAULT_PATTERNS = ("*.csv",)

Row = Dict[str, Any]


def _yaml() -> YAML:
    yaml = YAML(typ="safe")
    yaml.default_flow_style = False
    return yaml


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, bool):
        return int(value)
    return value


class ArtifactWriter:
    """一次运行的产物目录

    Args:
        out_dir: 目录
        config: 生效的配置
        preset: 预设名（可为空）
    """

    def __init__(self, out_dir: Union[str, Path], config: Config, preset: Optional[str] = None):
        self.out_dir = Path(out_dir)
        self.config = config
        self.preset = preset
        self.schema_version = config.output.schema_version
        self.files: List[Path] = []
        self.notes: Dict[str, Any] = {}
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"Cannot create artifact directory {self.out_dir}: {str(e)}")

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_csv(self, name: str, rows: Sequence[Row], schema: str, columns: Optional[Sequence[str]] = None) -> Path:
        """写带模式注释行的 CSV

        Args:
            name: 文件名
            rows: 行（字典）
            schema: 模式 id
            columns: 列顺序，默认取第一行的键

        Returns:
            Path: 文件路径
        """
        path = self.path(name)
        cols = list(columns) if columns is not None else (list(rows[0].keys()) if rows else [])
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write(f"{SCHEMA_PREFIX}{schema}/v{self.schema_version}\n")
                writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _cell(v) for k, v in row.items()})
        except OSError as e:
            raise ArtifactError(f"Failed to write {path}: {str(e)}")
        self._track(path)
        log.debug("Wrote %d rows to %s", len(rows), path)
        return path

    def write_config(self) -> Path:
        """保存生效配置，使目录可以仅凭自身复现"""
        path = self.path("config.yaml")
        with open(path, "w", encoding="utf-8") as fh:
            _yaml().dump(self.config.model_dump(mode="json"), fh)
        self._track(path)
        return path

    def add(self, path: Union[str, Path]) -> None:
        """登记一个由其他模块写出的文件"""
        self._track(Path(path))

    def _track(self, path: Path) -> None:
        if path not in self.files:
            self.files.append(path)

    def write_manifest(self, **notes: Any) -> Path:
        """写 manifest.yaml（在所有文件写完之后调用）"""
        self.notes.update(notes)
        manifest = {
            "name": self.config.name,
            "seed": self.config.engine.seed,
            "preset": self.preset,
            "config_fingerprint": config_fingerprint(self.config),
            "schema_version": self.schema_version,
            "versions": {
                "ringwatch": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "notes": self.notes,
            "files": {p.name: sha256_file(p) for p in sorted(self.files) if p.exists()},
        }
        path = self.path(MANIFEST)
        with open(path, "w", encoding="utf-8") as fh:
            _yaml().dump(manifest, fh)
        log.info("Artifacts written to %s (%d files)", self.out_dir, len(manifest["files"]))
        return path


def load_manifest(run_dir: Union[str, Path]) -> Dict[str, Any]:
    """读取 manifest.yaml

    Raises:
        ArtifactError: 文件缺失或无法解析
    """
    path = Path(run_dir) / MANIFEST
    if not path.exists():
        raise ArtifactError(f"No manifest in {run_dir}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = _yaml().load(fh)
    except Exception as e:
        raise ArtifactError(f"Failed to read manifest {path}: {str(e)}")
    if not isinstance(data, dict):
        raise ArtifactError(f"Manifest {path} is not a mapping")
    return data


def read_csv(path: Union[str, Path]) -> Tuple[Optional[str], List[Row]]:
    """读取带模式注释行的 CSV，返回 (模式, 行)"""
    path = Path(path)
    with open(path, "r", newline="", encoding="utf-8") as fh:
        first = fh.readline()
        schema = None
        if first.startswith(SCHEMA_PREFIX):
            schema = first[len(SCHEMA_PREFIX):].strip()
        else:
            fh.seek(0)
        return schema, list(csv.DictReader(fh))


def _numeric_columns(rows: Sequence[Row]) -> Dict[str, List[float]]:
    cols: Dict[str, List[float]] = {}
    if not rows:
        return cols
    for key in rows[0]:
        values: List[float] = []
        for row in rows:
            try:
                values.append(float(row[key]))
            except (TypeError, ValueError):
                values = []
                break
        if values:
            cols[key] = values
    return cols


@dataclass
class CompareReport:
    """两个产物目录的比较结果"""
    mode: str
    compared: List[str] = field(default_factory=list)
    missing: List[str] = field(default_factory=list)
    differing: List[str] = field(default_factory=list)
    diffs: Dict[str, Any] = field(default_factory=dict)

    @property
    def identical(self) -> bool:
        return not self.missing and not self.differing

    def lines(self) -> List[str]:
        out = [f"mode: {self.mode}", f"compared: {len(self.compared)} files"]
        out += [f"missing: {name}" for name in self.missing]
        for name in self.differing:
            detail = self.diffs.get(name)
            out.append(f"differs: {name}" + (f" ({detail})" if detail else ""))
        return out


def _select(run_dir: Path, spec: PathSpec) -> List[str]:
    return sorted(
        str(p.relative_to(run_dir)) for p in run_dir.rglob("*") if p.is_file() and spec.match_file(str(p.relative_to(run_dir)))
    )


def compare_runs(
    baseline: Union[str, Path],
    candidate: Union[str, Path],
    tolerance: Optional[float] = None,
    patterns: Iterable[str] = DEFAULT_PATTERNS,
) -> CompareReport:
    """比较两个产物目录

    Args:
        baseline: 基线目录
        candidate: 候选目录
        tolerance: 数值容差；给定时列出超过容差的具体差异
        patterns: 参与比较的文件（gitignore 风格模式）

    Returns:
        CompareReport: 比较结果

    Raises:
        ConfigMismatchError: 两次运行的配置指纹不同
        CompareError: 目录不存在
    """
    base, cand = Path(baseline), Path(candidate)
    for d in (base, cand):
        if not d.is_dir():
            raise CompareError(f"Not a run directory: {d}")
    m_base, m_cand = load_manifest(base), load_manifest(cand)
    if m_base.get("config_fingerprint") != m_cand.get("config_fingerprint"):
        raise ConfigMismatchError(
            "Runs were produced by different configurations",
            baseline=m_base.get("config_fingerprint"),
            candidate=m_cand.get("config_fingerprint"),
        )
    spec = PathSpec.from_lines(GitWildMatchPattern, list(patterns))
    names_b, names_c = _select(base, spec), _select(cand, spec)
    same_seed = m_base.get("seed") == m_cand.get("seed")
    mode = "tolerance" if tolerance is not None else ("exact" if same_seed else "ci")
    report = CompareReport(mode=mode)
    report.missing = sorted(set(names_b) ^ set(names_c))
    for name in sorted(set(names_b) & set(names_c)):
        report.compared.append(name)
        pb, pc = base / name, cand / name
        if mode == "exact":
            if sha256_file(pb) != sha256_file(pc):
                report.differing.append(name)
            continue
        _, rows_b = read_csv(pb)
        _, rows_c = read_csv(pc)
        if mode == "tolerance":
            diff = DeepDiff(
                [{k: _as_number(v) for k, v in r.items()} for r in rows_b],
                [{k: _as_number(v) for k, v in r.items()} for r in rows_c],
                math_epsilon=tolerance,
            )
            if diff:
                report.differing.append(name)
                report.diffs[name] = _diff_paths(diff)[:20]
            continue
        cols_b, cols_c = _numeric_columns(rows_b), _numeric_columns(rows_c)
        bad = [
            col
            for col in sorted(set(cols_b) & set(cols_c))
            if not intervals_overlap(mean_ci(cols_b[col]), mean_ci(cols_c[col]))
        ]
        if bad:
            report.differing.append(name)
            report.diffs[name] = bad
    if report.identical:
        log.info("Runs agree (%s mode, %d files)", mode, len(report.compared))
    else:
        log.warning("Runs diverge (%s mode): %d files differ, %d missing", mode, len(report.differing), len(report.missing))
    return report


def _diff_paths(diff: DeepDiff) -> List[str]:
    paths: List[str] = []
    for items in diff.values():
        paths.extend(str(k) for k in items)
    return sorted(paths)


def _as_number(value: Any) -> Any:
    try:
        return float(value)
    except (TypeError, ValueError):
        return value
