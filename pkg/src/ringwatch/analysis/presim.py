"""
预模拟分布模块

在给定快照与参数下预先跑大量查找，统计三张经验分布：
- ξ(x): 可链接查询离目标的最小虚拟跳数为 x 的概率；
- χ(size, V): 真实可链接查询集合大小与首尾虚拟查找最大单跳 V（对数分箱）的联合分布；
- γ(i, z): 大小为 z 的估计范围中第 i 个节点是目标的概率（z 与 i 都按对数分箱）。

表以 .npz 保存，带格式版本与配置指纹；指纹不符时拒绝加载。
"""
import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Union

import numpy as np

from ..config import AnonymityConfig
from ..utils import log
from ..utils.exceptions import PresimError
from .linkability import view_lookup
from .range_estimation import range_estimate, single_query_range
from .static_ring import StaticRing
from .world import WorldSampler

PRESIM_VERSION = 1
MAX_HOPS = 64
MAX_SUBSET = 32
MASK_REFRESH = 1000

ProgressFn = Callable[[int], None]


def presim_fingerprint(config: AnonymityConfig, k_dummy: Optional[int] = None) -> str:
    """影响分布形状的参数的指纹"""
    data = {
        "n_nodes": config.n_nodes,
        "fraction": config.fraction,
        "k_dummy": config.k_dummy if k_dummy is None else k_dummy,
        "fingers": config.effective_fingers,
        "successors": config.successors,
        "id_bits": config.id_bits,
        "walk_length": config.effective_walk_length,
        "multipath": config.multipath,
        "gamma_position_bins": config.gamma_position_bins,
    }
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def position_edges(n: int, bins: int) -> np.ndarray:
    """位置轴的对数分箱边界（整数，首项 1，末项 n+1，左闭右开）"""
    raw = np.floor(np.geomspace(1, n + 1, bins + 1)).astype(np.int64)
    edges = np.unique(np.concatenate([[1], raw, [n + 1]]))
    return edges


def log_bin(value: int) -> int:
    """0 → 0，否则 floor(log2 v) + 1"""
    return int(value).bit_length()


@dataclass
class PresimTables:
    """三张经验分布（保存的是计数，读取时归一化）"""
    n_nodes: int
    fingerprint: str
    xi_counts: np.ndarray
    chi_counts: np.ndarray
    gamma_counts: np.ndarray
    edges: np.ndarray
    lookups: int = 0
    version: int = PRESIM_VERSION
    _gamma_cache: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def empty(cls, n_nodes: int, bits: int, bins: int, fingerprint: str) -> "PresimTables":
        edges = position_edges(n_nodes, bins)
        z_bins = log_bin(n_nodes) + 1
        return cls(
            n_nodes=n_nodes,
            fingerprint=fingerprint,
            xi_counts=np.zeros(MAX_HOPS + 1),
            chi_counts=np.zeros((MAX_SUBSET + 1, bits + 2)),
            gamma_counts=np.zeros((z_bins, len(edges) - 1)),
            edges=edges,
        )

    def position_bin(self, i: int) -> int:
        return int(np.searchsorted(self.edges, i, side="right")) - 1

    # ---- 计数 ----

    def add_xi(self, hops: int) -> None:
        self.xi_counts[min(hops, MAX_HOPS)] += 1

    def add_chi(self, size: int, largest: int) -> None:
        self.chi_counts[min(size, MAX_SUBSET), min(log_bin(largest), self.chi_counts.shape[1] - 1)] += 1

    def add_gamma(self, location: int, size: int) -> None:
        zb = min(log_bin(size), self.gamma_counts.shape[0] - 1)
        self.gamma_counts[zb, self.position_bin(location)] += 1
        self._gamma_cache.clear()

    # ---- 查询 ----

    def xi(self, hops: int) -> float:
        total = self.xi_counts.sum()
        if total <= 0:
            return 1.0 / (MAX_HOPS + 1)
        return float(self.xi_counts[min(hops, MAX_HOPS)] / total)

    def chi(self, size: int, largest: int) -> float:
        total = self.chi_counts.sum()
        if total <= 0:
            return 1.0
        y = min(log_bin(largest), self.chi_counts.shape[1] - 1)
        return float(self.chi_counts[min(size, MAX_SUBSET), y] / total)

    def gamma_weights(self, z: int) -> np.ndarray:
        """大小为 z 的范围内各位置是目标的概率（长度 z，和为 1）

        同一分箱内按位置均分，每个分箱加 0.5 的平滑计数；该大小分箱没有样本时退化为均匀分布。
        """
        cached = self._gamma_cache.get(z)
        if cached is not None:
            return cached
        if z <= 0:
            raise PresimError(f"Range size must be positive, got {z}")
        row = self.gamma_counts[min(log_bin(z), self.gamma_counts.shape[0] - 1)]
        if row.sum() <= 0:
            weights = np.full(z, 1.0 / z)
        else:
            pos = np.arange(1, z + 1)
            bins = np.searchsorted(self.edges, pos, side="right") - 1
            lo = self.edges[:-1]
            hi = np.minimum(self.edges[1:] - 1, z)
            width = np.maximum(hi - lo + 1, 1)
            smoothed = row + 0.5
            weights = smoothed[bins] / width[bins]
            total = weights.sum()
            weights = weights / total if total > 0 else np.full(z, 1.0 / z)
        self._gamma_cache[z] = weights
        return weights

    # ---- 持久化 ----

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.savez_compressed(
                fh,
                version=np.array(self.version),
                n_nodes=np.array(self.n_nodes),
                fingerprint=np.array(self.fingerprint),
                lookups=np.array(self.lookups),
                xi=self.xi_counts,
                chi=self.chi_counts,
                gamma=self.gamma_counts,
                edges=self.edges,
            )
        log.info("Presimulation tables saved to %s", path)
        return path

    @classmethod
    def load(cls, path: Union[str, Path], fingerprint: Optional[str] = None) -> "PresimTables":
        """加载预模拟表

        Args:
            path: .npz 文件
            fingerprint: 期望的配置指纹，为空时不校验

        Raises:
            PresimError: 文件缺失、版本不符或指纹不符
        """
        path = Path(path)
        if not path.exists():
            raise PresimError(f"Presimulation tables not found: {path}")
        try:
            with np.load(path, allow_pickle=False) as data:
                version = int(data["version"])
                stored = str(data["fingerprint"])
                tables = cls(
                    n_nodes=int(data["n_nodes"]),
                    fingerprint=stored,
                    xi_counts=data["xi"],
                    chi_counts=data["chi"],
                    gamma_counts=data["gamma"],
                    edges=data["edges"],
                    lookups=int(data["lookups"]),
                    version=version,
                )
        except (OSError, KeyError, ValueError) as e:
            raise PresimError(f"Failed to read presimulation tables {path}: {str(e)}")
        if version != PRESIM_VERSION:
            raise PresimError(f"Presimulation table version {version} is not supported (expected {PRESIM_VERSION})")
        if fingerprint is not None and stored != fingerprint:
            raise PresimError(
                "Presimulation tables were built for a different configuration",
                details={"expected": fingerprint, "found": stored, "path": str(path)},
            )
        return tables

    def write_csv(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """把三张表导出为 CSV 供人查看"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {name: out_dir / f"presim_{name}.csv" for name in ("xi", "chi", "gamma")}
        with open(paths["xi"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["hops", "count", "probability"])
            for x, c in enumerate(self.xi_counts):
                w.writerow([x, int(c), self.xi(x)])
        with open(paths["chi"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["size", "largest_hop_bin", "count"])
            for (x, y), c in np.ndenumerate(self.chi_counts):
                if c:
                    w.writerow([x, y, int(c)])
        with open(paths["gamma"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["size_bin", "position_lo", "position_hi", "count"])
            for (zb, ib), c in np.ndenumerate(self.gamma_counts):
                if c:
                    w.writerow([zb, int(self.edges[ib]), int(self.edges[ib + 1]) - 1, int(c)])
        return paths


def presimulate(
    ring: StaticRing,
    config: AnonymityConfig,
    rng: np.random.Generator,
    lookups: Optional[int] = None,
    k_dummy: Optional[int] = None,
    progress: Optional[ProgressFn] = None,
) -> PresimTables:
    """预模拟：跑 lookups 次匿名查找并统计 ξ、χ、γ

    恶意集合每 MASK_REFRESH 次查找重抽一次。

    Args:
        ring: 静态快照
        config: 匿名性分析配置
        rng: 随机流
        lookups: 查找次数，默认取 config.presim_lookups
        k_dummy: 覆盖伪查询数
        progress: 进度回调（参数为本次新增的查找数）

    Returns:
        PresimTables: 统计表
    """
    total = config.presim_lookups if lookups is None else lookups
    sampler = WorldSampler(ring, config, k_dummy=k_dummy)
    tables = PresimTables.empty(
        ring.n, ring.space.bits, config.gamma_position_bins, presim_fingerprint(config, sampler.k_dummy)
    )
    n = ring.n
    mask = sampler.malicious_mask(rng)
    reported = 0
    for k in range(total):
        if k and k % MASK_REFRESH == 0:
            mask = sampler.malicious_mask(rng)
            if progress:
                progress(k - reported)
                reported = k
        transcript = sampler.sample_lookup(k, sampler.honest_initiator(mask, rng), sampler.random_key(rng), mask, rng)
        view = view_lookup(transcript, lambda x: bool(mask[x]))
        target = transcript.target
        if view.linkable:
            tables.add_xi(min(ring.hops(q.queried, target) for q in view.linkable))
        true_linked = view.true_linkable()
        if true_linked:
            nodes = [q.queried for q in sorted(true_linked, key=lambda q: q.index)]
            first, last = nodes[0], nodes[-1]
            largest = ring.largest_hop(ring.virtual_path(first, last)) if len(nodes) > 1 else 0
            tables.add_chi(len(nodes), largest)
            est = range_estimate(ring, nodes)
            loc = est.location(target, n)
            if loc is not None:
                tables.add_gamma(loc, est.size)
        true_seen = view.true_observed()
        if true_seen:
            closest = min(true_seen, key=lambda q: ring.dist(q.queried, target))
            single = single_query_range(ring, closest.queried)
            loc = single.location(target, n)
            if loc is not None:
                tables.add_gamma(loc, single.size)
    if progress and total > reported:
        progress(total - reported)
    tables.lookups = total
    log.info(
        "Presimulated %d lookups: xi=%d chi=%d gamma=%d samples",
        total,
        int(tables.xi_counts.sum()),
        int(tables.chi_counts.sum()),
        int(tables.gamma_counts.sum()),
    )
    return tables
