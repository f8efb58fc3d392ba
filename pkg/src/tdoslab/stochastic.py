"""Seedable random streams plus the call-duration and arrival samplers.

Streams wrap Python's ``random.Random`` (MT19937). A stream is seeded with an
unsigned 64-bit integer; sub-streams get their seed from a BLAKE2b digest of
the parent seed and a text label, so they are reproducible and do not share
state with the parent.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

from .domain import ArrivalMode, ConfigError, DurationKind

GENERATOR = "MT19937 (random.Random); sub-streams seeded by blake2b(seed, label)"


def derive_seed(seed: int, label: str) -> int:
    h = hashlib.blake2b(f"{seed}/{label}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class RandomStream:
    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self._rng = random.Random(seed)

    def derive(self, label) -> "RandomStream":
        return RandomStream(derive_seed(self.seed, str(label)))

    def random(self) -> float:
        return self._rng.random()

    def randbelow(self, n: int) -> int:
        return self._rng.randrange(n)

    def sample_indices(self, population: int, n: int) -> list[int]:
        return self._rng.sample(range(population), n)

    def normal(self, mu: float, sigma: float) -> float:
        return self._rng.normalvariate(mu, sigma)


def sample_uniform_int(rs: RandomStream, n: int) -> int:
    """Uniform integer in ``[0, n]`` inclusive."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return rs.randbelow(n + 1)


def sample_bernoulli(rs: RandomStream, p: float) -> bool:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    # always consume one draw so replay does not depend on p
    return rs.random() < p


@dataclass(frozen=True)
class DurationModel:
    kind: DurationKind
    mean: float
    sigma: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "kind", DurationKind(self.kind))
        if not self.mean > 0:
            raise ConfigError("mean call duration must be positive")
        if self.kind is DurationKind.LOGNORMAL and not self.sigma > 0:
            raise ConfigError("lognormal sigma must be positive")

    @property
    def lam(self) -> float:
        return 1.0 / self.mean

    @property
    def mu(self) -> float:
        # chosen so that E[X] = exp(mu + sigma^2 / 2) = mean
        return math.log(self.mean) - self.sigma ** 2 / 2


def sample_duration(rs: RandomStream, model: DurationModel) -> float:
    kind = model.kind
    if kind is DurationKind.FIXED:
        return model.mean
    if kind is DurationKind.EXPONENTIAL:
        # inverse CDF; 1 - u lies in (0, 1] so the log is finite
        return -math.log(1.0 - rs.random()) / model.lam
    return math.exp(rs.normal(model.mu, model.sigma))


def sample_interarrival(rs: RandomStream, rate: float, mode=ArrivalMode.POISSON) -> float:
    if not rate > 0:
        raise ValueError(f"arrival rate must be positive, got {rate!r}")
    if ArrivalMode(mode) is ArrivalMode.DETERMINISTIC:
        return 1.0 / rate
    return -math.log(1.0 - rs.random()) / rate
