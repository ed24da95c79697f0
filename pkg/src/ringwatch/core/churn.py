"""
节点流失模块

节点寿命服从均值 λ 的指数分布。流失处理按固定粒度（默认 1 秒）批量进行：
每个 tick 取出所有到期的节点，令其离开，并在 rejoin 时补充新节点。
"""
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..config import ChurnConfig
from .engine import Engine, RecurringTimer


@dataclass
class ChurnModel:
    """流失模型；mean_lifetime_min 为空或无穷表示静态网络"""
    mean_lifetime_min: Optional[float] = None
    rejoin: bool = True

    @classmethod
    def from_config(cls, config: ChurnConfig) -> "ChurnModel":
        return cls(mean_lifetime_min=config.mean_lifetime_min, rejoin=config.rejoin)

    @property
    def static(self) -> bool:
        return self.mean_lifetime_min is None or math.isinf(self.mean_lifetime_min)

    @property
    def mean_lifetime_ms(self) -> float:
        return math.inf if self.static else self.mean_lifetime_min * 60_000.0

    def sample_lifetime_ms(self, rng: np.random.Generator) -> Optional[int]:
        """抽取一个寿命（毫秒）；静态网络返回 None"""
        if self.static:
            return None
        return max(1, int(round(rng.exponential(self.mean_lifetime_ms))))


@dataclass
class ChurnStep:
    """一次流失处理的结果"""
    departures: List[int] = field(default_factory=list)
    arrivals: List[int] = field(default_factory=list)


class ChurnProcess:
    """驱动节点离开与补充

    Args:
        model: 流失模型
        engine: 事件引擎
        rng: churn 随机流
        on_depart: 节点离开回调，返回是否确实离开（节点可能已被吊销）
        on_arrive: 补充节点回调，参数为离开节点的 ID，返回新节点 ID
        tick_ms: 处理粒度
    """

    def __init__(
        self,
        model: ChurnModel,
        engine: Engine,
        rng: np.random.Generator,
        on_depart: Callable[[int], bool],
        on_arrive: Callable[[int], int],
        tick_ms: int = 1000,
    ):
        self.model = model
        self.engine = engine
        self.rng = rng
        self.on_depart = on_depart
        self.on_arrive = on_arrive
        self.tick_ms = tick_ms
        self._deaths: List[Tuple[int, int]] = []
        self._timer: Optional[RecurringTimer] = None
        self.total_departures = 0
        self.total_arrivals = 0
        self.lifetimes: List[int] = []

    def register(self, node: int) -> None:
        """为新加入的节点抽取寿命"""
        life = self.model.sample_lifetime_ms(self.rng)
        if life is None:
            return
        self.lifetimes.append(life)
        heapq.heappush(self._deaths, (self.engine.now + life, node))

    def start(self) -> None:
        if self.model.static or self._timer is not None:
            return
        self._timer = self.engine.every(self.tick_ms, self.churn_step)

    def stop(self) -> None:
        if self._timer is not None:
            self._timer.stop()
            self._timer = None

    def churn_step(self) -> ChurnStep:
        """处理所有到期的离开事件"""
        step = ChurnStep()
        now = self.engine.now
        while self._deaths and self._deaths[0][0] <= now:
            _, node = heapq.heappop(self._deaths)
            if not self.on_depart(node):
                continue
            step.departures.append(node)
            if self.model.rejoin:
                step.arrivals.append(self.on_arrive(node))
        self.total_departures += len(step.departures)
        self.total_arrivals += len(step.arrivals)
        return step
