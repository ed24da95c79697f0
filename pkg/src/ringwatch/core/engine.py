"""
离散事件引擎模块

虚拟时钟以整数毫秒计。事件按 (fire_at, seq) 排序，seq 在调度时单调分配，
保证同一时刻的事件按调度顺序处理。
"""
import hashlib
import heapq
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.exceptions import ScheduleError
from .latency import LatencyModel

Handler = Callable[[], Any]
Accounting = Callable[[Sequence[int], str, int], None]


class EventKind(str, Enum):
    """事件类型"""
    MESSAGE_DELIVERY = "message_delivery"
    TIMER = "timer"


@dataclass
class SimClock:
    """虚拟时钟"""
    now: int = 0

    def advance(self, t: int) -> None:
        if t < self.now:
            raise ScheduleError(f"Clock cannot run backward ({t} < {self.now})")
        self.now = t


@dataclass(eq=False)
class SimEvent:
    """一次消息投递或定时器触发"""
    fire_at: int
    kind: EventKind
    dst: Optional[int] = None
    src: Optional[int] = None
    payload: Any = None
    callback: Optional[Callable[["SimEvent"], None]] = field(default=None, repr=False)
    seq: int = -1
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


class Delayed(NamedTuple):
    """处理函数的应答及其额外处理耗时"""
    reply: Any
    service_ms: int


class RecurringTimer:
    """周期定时器；所属节点离开后自动停止"""

    __slots__ = ("engine", "interval", "callback", "owner", "event", "stopped")

    def __init__(self, engine: "Engine", interval: int, callback: Callable[[], None], owner: Optional[int]):
        self.engine = engine
        self.interval = interval
        self.callback = callback
        self.owner = owner
        self.event: Optional[SimEvent] = None
        self.stopped = False

    def arm(self, fire_at: int) -> None:
        self.event = self.engine.schedule(
            SimEvent(fire_at=fire_at, kind=EventKind.TIMER, dst=self.owner, callback=self._fire)
        )

    def _fire(self, event: SimEvent) -> None:
        if self.stopped:
            return
        if self.owner is not None and not self.engine.alive(self.owner):
            self.stopped = True
            return
        self.arm(event.fire_at + self.interval)
        self.callback()

    def stop(self) -> None:
        self.stopped = True
        if self.event is not None:
            self.event.cancel()


class _Call:
    """一次请求/应答交互的状态"""

    __slots__ = (
        "engine", "path", "handler", "on_reply", "on_timeout", "deadline",
        "msg_class", "reply_bytes", "relay_delay", "result",
    )

    def __init__(self, engine, path, handler, on_reply, on_timeout, deadline, msg_class, reply_bytes, relay_delay):
        self.engine = engine
        self.path = path
        self.handler = handler
        self.on_reply = on_reply
        self.on_timeout = on_timeout
        self.deadline = deadline
        self.msg_class = msg_class
        self.reply_bytes = reply_bytes
        self.relay_delay = relay_delay
        self.result = None

    def arrive(self, event: SimEvent) -> None:
        engine = self.engine
        if not engine.all_alive(self.path[1:]):
            engine.lost += 1
            self.expire()
            return
        result = self.handler()
        if result is None:
            self.expire()
            return
        service = 0
        if isinstance(result, Delayed):
            result, service = result.reply, result.service_ms
        back = tuple(reversed(self.path))
        delay = engine.path_latency(back) + service
        if self.relay_delay is not None:
            delay += self.relay_delay()
        size = self.reply_bytes(result) if callable(self.reply_bytes) else self.reply_bytes
        engine.account(back, self.msg_class, size)
        arrival = engine.now + delay
        if arrival > self.deadline:
            self.expire()
            return
        self.result = result
        engine.schedule(
            SimEvent(
                fire_at=arrival,
                kind=EventKind.MESSAGE_DELIVERY,
                src=self.path[-1],
                dst=self.path[0],
                callback=self.returned,
            )
        )

    def returned(self, event: SimEvent) -> None:
        engine = self.engine
        if not engine.alive(self.path[0]):
            return
        if not engine.all_alive(self.path[1:-1]):
            engine.lost += 1
            self.expire()
            return
        self.on_reply(self.result)

    def expire(self) -> None:
        engine = self.engine
        engine.schedule(
            SimEvent(
                fire_at=max(self.deadline, engine.now),
                kind=EventKind.TIMER,
                dst=self.path[0],
                callback=self._timeout,
            )
        )

    def _timeout(self, event: SimEvent) -> None:
        if self.engine.alive(self.path[0]) and self.on_timeout is not None:
            self.on_timeout()


class Engine:
    """单线程离散事件引擎

    Args:
        latency: 延迟模型
        rng: 抖动使用的随机流
        alive: 存活判断函数（通常是 Membership.is_alive）
        timeout_factor: 超时 = 因子 × 单程延迟估计
        timeout_floor_ms: 超时下限
        record_trace: 是否记录事件轨迹摘要
    """

    def __init__(
        self,
        latency: LatencyModel,
        rng: np.random.Generator,
        alive: Optional[Callable[[int], bool]] = None,
        timeout_factor: float = 4.0,
        timeout_floor_ms: int = 2000,
        record_trace: bool = False,
    ):
        self.latency = latency
        self.rng = rng
        self.alive: Callable[[int], bool] = alive or (lambda node: True)
        self.timeout_factor = timeout_factor
        self.timeout_floor_ms = timeout_floor_ms
        self.clock = SimClock()
        self._queue: List[Tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.processed = 0
        self.lost = 0
        self.dropped = 0
        self.on_message: Optional[Accounting] = None
        self._trace = hashlib.blake2b(digest_size=16) if record_trace else None

    @property
    def now(self) -> int:
        return self.clock.now

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, event: SimEvent) -> SimEvent:
        """调度事件

        Raises:
            ScheduleError: 事件时间早于当前时钟
        """
        if event.fire_at < self.clock.now:
            raise ScheduleError(
                f"Event scheduled in the past (fire_at={event.fire_at}, now={self.clock.now})"
            )
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (event.fire_at, event.seq, event))
        return event

    def at(self, t: int, callback: Callable[[], None], owner: Optional[int] = None) -> SimEvent:
        """在时刻 t 调用 callback；owner 已离开时不调用"""
        def fire(event: SimEvent) -> None:
            if owner is None or self.alive(owner):
                callback()

        return self.schedule(SimEvent(fire_at=int(t), kind=EventKind.TIMER, dst=owner, callback=fire))

    def after(self, delay_ms: int, callback: Callable[[], None], owner: Optional[int] = None) -> SimEvent:
        return self.at(self.clock.now + int(delay_ms), callback, owner)

    def every(
        self,
        interval_ms: int,
        callback: Callable[[], None],
        owner: Optional[int] = None,
        first_at: Optional[int] = None,
    ) -> RecurringTimer:
        """周期调用 callback，首次在 first_at（默认 now + interval）"""
        timer = RecurringTimer(self, int(interval_ms), callback, owner)
        timer.arm(self.clock.now + int(interval_ms) if first_at is None else int(first_at))
        return timer

    def all_alive(self, nodes: Sequence[int]) -> bool:
        alive = self.alive
        return all(alive(n) for n in nodes)

    def account(self, path: Sequence[int], msg_class: str, nbytes: int) -> None:
        if self.on_message is not None:
            self.on_message(path, msg_class, nbytes)

    def path_latency(self, path: Sequence[int]) -> int:
        """沿路径逐跳抽取延迟之和"""
        sample = self.latency.sample
        rng = self.rng
        return sum(sample(path[k], path[k + 1], rng) for k in range(len(path) - 1))

    def timeout_for(self, path: Sequence[int], extra_ms: int = 0) -> int:
        """路径的应答超时：max(下限, 因子 × 单程延迟估计)"""
        mean = self.latency.mean
        estimate = sum(mean(path[k], path[k + 1]) for k in range(len(path) - 1)) + extra_ms
        return max(self.timeout_floor_ms, int(self.timeout_factor * estimate))

    def send(
        self,
        src: int,
        dst: int,
        payload: Any,
        on_deliver: Callable[[Any], None],
        msg_class: str = "message",
        nbytes: int = 0,
    ) -> SimEvent:
        """单向发送；投递时 dst 已离开则静默丢弃"""
        return self.send_path((src, dst), payload, on_deliver, msg_class=msg_class, nbytes=nbytes)

    def send_path(
        self,
        path: Sequence[int],
        payload: Any,
        on_deliver: Callable[[Any], None],
        extra_delay_ms: int = 0,
        msg_class: str = "message",
        nbytes: int = 0,
    ) -> SimEvent:
        """沿中继路径一次性投递；投递时任何中继或终点已离开则丢弃"""
        path = tuple(path)
        fire_at = self.clock.now + self.path_latency(path) + int(extra_delay_ms)
        self.account(path, msg_class, nbytes)

        def deliver(event: SimEvent) -> None:
            if not self.all_alive(path[1:]):
                self.dropped += 1
                return
            on_deliver(payload)

        return self.schedule(
            SimEvent(
                fire_at=fire_at,
                kind=EventKind.MESSAGE_DELIVERY,
                src=path[0],
                dst=path[-1],
                payload=payload,
                callback=deliver,
            )
        )

    def rpc(
        self,
        src: int,
        dst: int,
        handler: Handler,
        on_reply: Callable[[Any], None],
        on_timeout: Optional[Callable[[], None]] = None,
        *,
        via: Sequence[int] = (),
        msg_class: str = "rpc",
        request_bytes: int = 0,
        reply_bytes: Union[int, Callable[[Any], int]] = 0,
        relay_delay: Optional[Callable[[], int]] = None,
        timeout_ms: Optional[int] = None,
        extra_timeout_ms: int = 0,
    ) -> int:
        """请求/应答

        请求在到达时执行 handler；handler 返回 None 表示不应答。
        请求或应答丢失时 on_timeout 在截止时刻触发。

        Returns:
            int: 截止时刻
        """
        path = (src, *via, dst)
        if timeout_ms is None:
            timeout_ms = self.timeout_for(path, extra_timeout_ms)
        deadline = self.clock.now + int(timeout_ms)
        call = _Call(self, path, handler, on_reply, on_timeout, deadline, msg_class, reply_bytes, relay_delay)
        forward = self.path_latency(path)
        if relay_delay is not None:
            forward += relay_delay()
        self.account(path, msg_class, request_bytes)
        self.schedule(
            SimEvent(
                fire_at=self.clock.now + forward,
                kind=EventKind.MESSAGE_DELIVERY,
                src=src,
                dst=dst,
                callback=call.arrive,
            )
        )
        return deadline

    def run_until(self, t_end: int) -> int:
        """处理所有 fire_at ≤ t_end 的事件，返回处理的事件数"""
        queue = self._queue
        clock = self.clock
        trace = self._trace
        count = 0
        while queue and queue[0][0] <= t_end:
            fire_at, seq, event = heapq.heappop(queue)
            if event.cancelled:
                continue
            clock.now = fire_at
            count += 1
            if trace is not None:
                trace.update(struct.pack("<qq?", fire_at, seq, event.kind is EventKind.TIMER))
            event.callback(event)
        if t_end > clock.now:
            clock.now = t_end
        self.processed += count
        return count

    def run_for(self, duration_ms: int) -> int:
        return self.run_until(self.clock.now + int(duration_ms))

    def trace_digest(self) -> Optional[str]:
        """事件轨迹摘要（仅在 record_trace 时可用）"""
        return self._trace.hexdigest() if self._trace is not None else None
