"""Core data model: actors, calls, the server buffer, events and the scheduler."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional


class ConfigError(ValueError):
    """Raised for invalid scenario or defense parameters."""


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class ActorKind(str, Enum):
    CLIENT = "client"
    ATTACKER = "attacker"
    SERVER = "server"
    CLIENT_GENERATOR = "client-generator"
    ATTACKER_GENERATOR = "attacker-generator"


class ActorId(NamedTuple):
    kind: ActorKind
    index: int

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.index}"


SERVER = ActorId(ActorKind.SERVER, 0)
CLIENT_GENERATOR = ActorId(ActorKind.CLIENT_GENERATOR, 0)
ATTACKER_GENERATOR = ActorId(ActorKind.ATTACKER_GENERATOR, 0)


class CallPhase(str, Enum):
    WAIT = "WAIT"
    IN = "IN"


@dataclass
class BufferEntry:
    actor: ActorId
    phase: CallPhase = CallPhase.WAIT
    # time the call entered IN; None while waiting
    stamp: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.phase is CallPhase.WAIT) != (self.stamp is None):
            raise ValueError("stamp must be set exactly when phase is IN")


class BufferFull(RuntimeError):
    pass


class ServerBuffer:
    """Bounded, ordered list of calls held by the server."""

    def __init__(self, capacity: int, entries=()):
        if capacity < 1:
            raise ConfigError("buffer capacity must be positive")
        self.capacity = capacity
        self.entries: list[BufferEntry] = []
        for e in entries:
            self.append(e)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> BufferEntry:
        return self.entries[i]

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    def find(self, actor: ActorId) -> int:
        for i, e in enumerate(self.entries):
            if e.actor == actor:
                return i
        return -1

    def append(self, entry: BufferEntry) -> None:
        if self.full:
            raise BufferFull(f"buffer already holds {self.capacity} entries")
        if self.find(entry.actor) >= 0:
            raise ValueError(f"{entry.actor} already in buffer")
        self.entries.append(entry)

    def insert(self, index: int, entry: BufferEntry) -> None:
        if self.full:
            raise BufferFull(f"buffer already holds {self.capacity} entries")
        if self.find(entry.actor) >= 0:
            raise ValueError(f"{entry.actor} already in buffer")
        self.entries.insert(index, entry)

    def pop(self, index: int) -> BufferEntry:
        return self.entries.pop(index)

    def snapshot(self) -> list[tuple]:
        return [(e.actor, e.phase, e.stamp) for e in self.entries]


class Strategy(str, Enum):
    NONE = "none"
    UNIFORM = "uniform"
    ROULETTE = "roulette"
    TOURNAMENT = "tournament"


@dataclass(frozen=True)
class DefenseParams:
    k: int = 24
    Ts: float = 0.1
    p_wait: float = 8.0
    p_in: float = 2.0
    alpha: float = 1.89
    t_M: float = 5.0
    strategy: Strategy = Strategy.TOURNAMENT
    # tournament size; None means k // 2
    n: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.k < 1:
            raise ConfigError("defense.k must be a positive integer")
        for name in ("Ts", "p_wait", "p_in", "alpha", "t_M"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"defense.{name} must be positive, got {v!r}")
        if self.p_wait <= self.p_in:
            raise ConfigError("defense.p_wait must exceed defense.p_in")
        if self.n is None:
            object.__setattr__(self, "n", max(1, self.k // 2))
        if not 1 <= self.n <= self.k:
            raise ConfigError(f"defense.n must lie in [1, {self.k}], got {self.n}")

    @property
    def defended(self) -> bool:
        return self.strategy is not Strategy.NONE


class Content(str, Enum):
    SPAWN = "spawn"
    POLL = "poll"
    INVITE = "INVITE"
    TRYING = "TRYING"
    RINGING = "RINGING"
    BYE = "BYE"
    ROUND = "ROUND"
    UNAVAILABLE = "UNAVAILABLE"
    DROP_NOTICE = "DROP"


@dataclass(frozen=True, slots=True)
class Event:
    due: float
    target: ActorId
    content: Content
    sender: Optional[ActorId] = None
    seq: int = -1


class Scheduler:
    """Timestamped event queue with a global clock.

    Events are delivered in ``(due, seq)`` order, so equal delivery times
    pop in insertion order.
    """

    def __init__(self, now: float = 0.0):
        self.now = now
        self._heap: list[tuple[float, int, Event]] = []
        self._counter = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    @property
    def queue(self) -> list[Event]:
        return [e for _, _, e in sorted(self._heap)]

    def insert(self, *events: Event) -> "Scheduler":
        for evt in events:
            if evt.due < self.now:
                raise SchedulingError(
                    f"cannot schedule {evt.content.value} at {evt.due} before now={self.now}"
                )
        for evt in events:
            seq = next(self._counter)
            stamped = Event(evt.due, evt.target, evt.content, evt.sender, seq)
            heapq.heappush(self._heap, (evt.due, seq, stamped))
        return self

    def schedule(self, due: float, target: ActorId, content: Content,
                 sender: Optional[ActorId] = None) -> None:
        if due < self.now:
            raise SchedulingError(
                f"cannot schedule {content.value} at {due} before now={self.now}"
            )
        seq = next(self._counter)
        heapq.heappush(self._heap, (due, seq, Event(due, target, content, sender, seq)))

    def peek(self) -> Optional[Event]:
        return self._heap[0][2] if self._heap else None

    def tick(self) -> Optional[Event]:
        """Pop the head event and advance the clock; None once the queue is empty."""
        if not self._heap:
            return None
        due, _, evt = heapq.heappop(self._heap)
        self.now = due
        return evt


class Outcome(str, Enum):
    PENDING = "pending"
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    UNSUCCESSFUL = "unsuccessful"
    CENSORED = "censored"


@dataclass
class CallRecord:
    actor: ActorId
    honest: bool
    invited_at: Optional[float] = None
    incall_at: Optional[float] = None
    intended_duration: Optional[float] = None
    outcome: Outcome = Outcome.PENDING
    talked_fraction: Optional[float] = None
    retries: int = 0

    def mark_incomplete(self, drop_time: float) -> None:
        if self.incall_at is None:
            raise ValueError("an incomplete call must have been in call")
        self.outcome = Outcome.INCOMPLETE
        if self.intended_duration:
            frac = (drop_time - self.incall_at) / self.intended_duration
            self.talked_fraction = min(1.0, max(0.0, frac))


class DurationKind(str, Enum):
    EXPONENTIAL = "exponential"
    LOGNORMAL = "lognormal"
    FIXED = "fixed"


class ArrivalMode(str, Enum):
    POISSON = "poisson"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class ScenarioConfig:
    rate: float
    defense: DefenseParams = field(default_factory=DefenseParams)
    total: float = 40.0
    delay: float = 0.1
    attacker_share: float = 0.0
    duration_model: DurationKind = DurationKind.LOGNORMAL
    sigma: float = 0.8
    arrivals: ArrivalMode = ArrivalMode.POISSON
    seed: int = 0
    retry_rejected: bool = False
    max_retries: int = 0
    # metadata only
    time_unit: str = "minute"

    def __post_init__(self) -> None:
        object.__setattr__(self, "duration_model", DurationKind(self.duration_model))
        object.__setattr__(self, "arrivals", ArrivalMode(self.arrivals))
        if not (self.total > 0 and math.isfinite(self.total)):
            raise ConfigError("scenario.total must be positive")
        if not self.delay >= 0:
            raise ConfigError("scenario.delay must be non-negative")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ConfigError("scenario.rate must be non-negative")
        if not 0.0 <= self.attacker_share <= 1.0:
            raise ConfigError("scenario.attacker_share must lie in [0, 1]")
        if self.duration_model is DurationKind.LOGNORMAL and not self.sigma > 0:
            raise ConfigError("scenario.sigma must be positive")
        if self.max_retries < 0:
            raise ConfigError("scenario.max_retries must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("scenario.seed must be an unsigned 64-bit integer")

    def _split(self) -> tuple[float, float]:
        share, rate = self.attacker_share, self.rate
        small = min(share, 1.0 - share) * rate
        large = rate - small
        # large >= rate / 2, so rate - large is exact and the parts sum to rate
        small = rate - large
        return (small, large) if share <= 0.5 else (large, small)

    @property
    def attacker_rate(self) -> float:
        return self._split()[0]

    @property
    def client_rate(self) -> float:
        return self._split()[1]
