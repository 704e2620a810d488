"""Deterministic discrete-event core: fixed-point clock, ordered queue and the run's single random stream."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

from overlay_sim import console
from overlay_sim.errors import EmptyRangeError, SchedulingError

T = TypeVar("T")

# One tick is one millisecond of simulated time.
TICKS_PER_MINUTE = 60_000


@dataclass(frozen=True, order=True)
class SimTime:
    ticks: int

    def __post_init__(self) -> None:
        if self.ticks < 0:
            raise ValueError(f"simulated time cannot be negative: {self.ticks} ticks")

    @classmethod
    def minutes(cls, value: float) -> SimTime:
        return cls(int(round(value * TICKS_PER_MINUTE)))

    @property
    def as_minutes(self) -> float:
        return self.ticks / TICKS_PER_MINUTE

    def __add__(self, other: SimTime) -> SimTime:
        return SimTime(self.ticks + other.ticks)

    def elapsed_since(self, earlier: SimTime) -> SimTime:
        return SimTime(self.ticks - earlier.ticks)

    def __str__(self) -> str:
        return f"{self.as_minutes:g}min"


ZERO = SimTime(0)


def format_minutes(t: SimTime) -> str:
    """Compact, stable rendering used in CSV cells and file names (10, 12.5, 0.001)."""
    return f"{t.as_minutes:.3f}".rstrip("0").rstrip(".")


class EventKind(Enum):
    PEER_JOIN = "join"
    PEER_LEAVE = "leave"
    TRACKER_REANNOUNCE = "reannounce"
    HEARTBEAT = "heartbeat"
    SNAPSHOT = "snapshot"


@dataclass(frozen=True, slots=True)
class Event:
    time: SimTime
    seq: int
    kind: EventKind
    peer: Optional[int] = None
    label: Optional[str] = None

    @property
    def subject(self) -> str:
        return (self.label or "") if self.peer is None else str(self.peer)


TraceEntry = tuple[int, int, str, str]


class SimRandom:
    """The one random stream of a run; every draw is a pure function of the seed and the call order."""

    def __init__(self, seed: int):
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def random(self) -> float:
        return float(self._gen.random())

    def uniform(self, low: float, high: float) -> float:
        """Uniform on [low, high); a degenerate range low == high yields low."""
        if high < low:
            raise EmptyRangeError(f"empty range [{low}, {high})")
        if high == low:
            return low
        return float(self._gen.uniform(low, high))

    def below(self, n: int) -> int:
        if n <= 0:
            raise EmptyRangeError(f"empty integer range [0, {n})")
        return int(self._gen.integers(n))

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise EmptyRangeError("choice from an empty sequence")
        return items[self.below(len(items))]

    def sample(self, population: Sequence[T], k: int) -> list[T]:
        """k distinct elements drawn uniformly without replacement."""
        if k > len(population) or k < 0:
            raise EmptyRangeError(f"cannot sample {k} of {len(population)}")
        if k == 0:
            return []
        picks = self._gen.choice(len(population), size=k, replace=False)
        return [population[int(i)] for i in picks]

    def shuffled(self, items: Sequence[T]) -> list[T]:
        return [items[int(i)] for i in self._gen.permutation(len(items))]


Handler = Callable[[Event], None]


@dataclass
class Engine:
    seed: int
    record_trace: bool = False
    clock: SimTime = ZERO
    rng: SimRandom = field(init=False)
    trace: list[TraceEntry] = field(default_factory=list)
    _queue: list[tuple[int, int, Event]] = field(default_factory=list)
    _seq: int = 0
    _handlers: dict[EventKind, Handler] = field(default_factory=dict)
    _after_event: list[Handler] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.rng = SimRandom(self.seed)

    @property
    def now(self) -> SimTime:
        return self.clock

    @property
    def pending(self) -> int:
        return len(self._queue)

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def after_each_event(self, hook: Handler) -> None:
        self._after_event.append(hook)

    def schedule(
        self,
        time: SimTime,
        kind: EventKind,
        *,
        peer: Optional[int] = None,
        label: Optional[str] = None,
    ) -> Event:
        if time < self.clock:
            raise SchedulingError(f"cannot schedule {kind.value} at {time}, clock is already at {self.clock}")
        event = Event(time, self._seq, kind, peer, label)
        self._seq += 1
        heapq.heappush(self._queue, (time.ticks, event.seq, event))
        return event

    def run_until(self, t_end: SimTime) -> int:
        """Process every event with time <= t_end in (time, seq) order; returns the number processed."""
        if t_end < self.clock:
            raise SchedulingError(f"cannot run backwards from {self.clock} to {t_end}")
        processed = 0
        while self._queue and self._queue[0][0] <= t_end.ticks:
            _, _, event = heapq.heappop(self._queue)
            self.clock = event.time
            if self.record_trace:
                self.trace.append((event.time.ticks, event.seq, event.kind.value, event.subject))
            if console.enabled(console.DEBUG):
                console.debug(f"t={event.time} #{event.seq} {event.kind.value} {event.subject}")
            handler = self._handlers.get(event.kind)
            if handler is not None:
                handler(event)
            for hook in self._after_event:
                hook(event)
            processed += 1
        self.clock = t_end
        return processed
