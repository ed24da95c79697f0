"""
随机数流模块

一个根种子派生出按用途命名的独立流，新增功能不会扰动已有流的序列。
"""
import zlib
from typing import Dict, List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

STREAMS = (
    "ids",
    "keys",
    "latency",
    "churn",
    "overlay",
    "checks",
    "walks",
    "dummies",
    "adversary",
    "workload",
    "relays",
    "snapshot",
    "presim",
    "trials",
    "timing",
)


class RngStreams:
    """按名称派生的 numpy 随机流"""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: Dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        """获取（或首次创建）名为 name 的随机流"""
        gen = self._streams.get(name)
        if gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))
            gen = np.random.default_rng(ss)
            self._streams[name] = gen
        return gen

    __getitem__ = stream

    def spawn(self, index: int) -> "RngStreams":
        """为第 index 个蒙特卡洛副本派生子种子"""
        child = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(b"replica"), index))
        return RngStreams(int(child.generate_state(1, dtype=np.uint64)[0] >> 1))


def choice(rng: np.random.Generator, items: Sequence[T]) -> T:
    """从序列中均匀选一个元素（保持 Python 类型）"""
    return items[int(rng.integers(len(items)))]


def sample(rng: np.random.Generator, items: Sequence[T], k: int) -> List[T]:
    """不放回抽取 k 个元素"""
    idx = rng.choice(len(items), size=min(k, len(items)), replace=False)
    return [items[int(i)] for i in idx]

