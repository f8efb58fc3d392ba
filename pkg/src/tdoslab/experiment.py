"""Erlang-B rate sizing, Monte-Carlo replication with CI stopping, scenario grids."""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

from scipy import stats

from .domain import DefenseParams, DurationKind, ScenarioConfig, Strategy
from .engine import run_scenario
from .metrics import compute_measures
from .stochastic import derive_seed

log = logging.getLogger(__name__)

DEFAULT_SHARES = (0.17, 0.33, 0.50, 0.67, 0.83)
MEASURES = ("complete", "incomplete", "unsuccessful", "avg_incall", "occupancy")


class SizingError(ValueError):
    pass


def erlang_b(load: float, servers: int) -> float:
    """Blocking probability of an M/G/m/m loss system offered ``load`` erlang."""
    if load < 0 or servers < 0:
        raise ValueError("load and servers must be non-negative")
    b = 1.0
    for m in range(1, servers + 1):
        b = load * b / (m + load * b)
    return b


def size_rate(k: int, t_M: float, *, utilization: float | None = None,
              blocking: float | None = None, rel_tol: float = 1e-6) -> float:
    """Total call rate R for a server with ``k`` slots and mean holding time ``t_M``.

    Give exactly one target. ``utilization`` yields ``rho * k / t_M``;
    ``blocking`` yields the largest R whose Erlang-B blocking stays at or
    below the target, found by bisection.
    """
    if (utilization is None) == (blocking is None):
        raise SizingError("give exactly one of utilization or blocking")
    if not t_M > 0 or k < 0:
        raise SizingError("need t_M > 0 and k >= 0")
    if utilization is not None:
        rate = utilization * k / t_M
        if not rate > 0:
            raise SizingError(f"utilization {utilization} gives a non-positive rate")
        return rate

    if not 0 < blocking < 1:
        raise SizingError("blocking target must lie in (0, 1)")
    if k == 0:
        raise SizingError("a server with no slots blocks every call")
    lo, hi = 0.0, float(k) or 1.0
    while erlang_b(hi, k) <= blocking:
        lo, hi = hi, hi * 2
    while hi - lo > rel_tol * hi:
        mid = (lo + hi) / 2
        if erlang_b(mid, k) <= blocking:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise SizingError(f"no positive rate meets blocking {blocking}")
    return lo / t_M


# ----------------------------------------------------------- Monte Carlo


@dataclass(frozen=True)
class MCConfig:
    confidence: float = 0.99
    delta: float = 0.01
    min_runs: int = 30
    max_runs: int = 2000
    base_seed: Optional[int] = None
    measures: tuple[str, ...] = ("complete", "incomplete", "unsuccessful", "avg_incall")
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.min_runs < 2 or self.max_runs < self.min_runs:
            raise ValueError("need 2 <= min_runs <= max_runs")
        object.__setattr__(self, "measures", tuple(self.measures))
        unknown = [m for m in self.measures if m not in MEASURES]
        if unknown or not self.measures:
            raise ValueError(f"measures must be a non-empty subset of {MEASURES}")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


@dataclass
class MeasureStats:
    mean: Optional[float]
    sample_std: Optional[float]
    halfwidth: float
    runs_used: int


@dataclass
class MCResult:
    measures: dict[str, MeasureStats]
    runs: int
    converged: bool
    confidence: float
    delta: float
    base_seed: int
    metadata: dict = field(default_factory=dict)

    def mean(self, name: str) -> Optional[float]:
        return self.measures[name].mean

    def halfwidth(self, name: str) -> float:
        return self.measures[name].halfwidth


@lru_cache(maxsize=None)
def t_quantile(confidence: float, df: int) -> float:
    """Two-sided Student-t critical value."""
    return float(stats.t.ppf(1 - (1 - confidence) / 2, df))


def ci_halfwidth(sample_std: float, n: int, confidence: float) -> float:
    if n < 2:
        return math.inf
    return t_quantile(confidence, n - 1) * sample_std / math.sqrt(n)


class _Running:
    """Welford accumulator for one measure."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    @property
    def std(self) -> Optional[float]:
        return math.sqrt(self.m2 / (self.n - 1)) if self.n > 1 else None

    def stats(self, confidence: float) -> MeasureStats:
        if self.n == 0:
            return MeasureStats(None, None, 0.0, 0)
        std = self.std
        hw = 0.0 if std == 0 else ci_halfwidth(std or 0.0, self.n, confidence)
        return MeasureStats(self.mean, std, hw, self.n)


def replica_measures(cfg: ScenarioConfig) -> dict[str, Optional[float]]:
    """One replica reduced to the tracked measures (None where undefined)."""
    m = compute_measures(run_scenario(cfg))
    return {
        "complete": m.complete,
        "incomplete": m.incomplete,
        "unsuccessful": m.unsuccessful,
        # the vacuous 1.0 carries no information about interrupted calls
        "avg_incall": None if m.avg_incall_vacuous else m.avg_incall,
        "occupancy": m.mean_attacker_occupancy,
    }


def replica_seed(base_seed: int, index: int) -> int:
    return derive_seed(base_seed, f"replica/{index}")


def monte_carlo(replica: Callable[[int], dict], mc: MCConfig, base_seed: int,
                pool=None, metadata: dict | None = None) -> MCResult:
    """Run replicas until every tracked measure's CI half-width is at most ``delta``.

    ``replica(seed)`` returns a mapping of measure name to value (or None).
    Replica ``i`` always receives ``replica_seed(base_seed, i)`` and the
    stopping rule is evaluated replica by replica in index order, so the
    result does not depend on how replicas were scheduled.
    """
    acc = {name: _Running() for name in mc.measures}
    runs = 0
    converged = False
    batch = max(1, mc.jobs) * 8

    def results():
        for start in itertools.count(0, batch):
            stop = min(start + batch, mc.max_runs)
            if start >= stop:
                return
            seeds = [replica_seed(base_seed, i) for i in range(start, stop)]
            if pool is None:
                yield from (replica(s) for s in seeds)
            else:
                yield from pool.map(replica, seeds)

    for values in results():
        runs += 1
        for name, a in acc.items():
            v = values.get(name)
            if v is not None:
                a.add(v)
        if runs >= mc.min_runs and _done(acc, mc):
            converged = True
            break
        if runs >= mc.max_runs:
            break

    if not converged:
        log.warning("Monte Carlo stopped at max_runs=%d without reaching delta=%g",
                    runs, mc.delta)
    return MCResult(
        measures={name: a.stats(mc.confidence) for name, a in acc.items()},
        runs=runs,
        converged=converged,
        confidence=mc.confidence,
        delta=mc.delta,
        base_seed=base_seed,
        metadata={"stopping_rule": "sequential Student-t CI, absolute half-width",
                  **(metadata or {})},
    )


def _done(acc: dict[str, _Running], mc: MCConfig) -> bool:
    for a in acc.values():
        if a.n == 0:
            # undefined in every replica so far (e.g. avg_incall without drops)
            continue
        if a.stats(mc.confidence).halfwidth > mc.delta:
            return False
    return True


class _BoundReplica:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg

    def __call__(self, seed: int) -> dict:
        return replica_measures(dataclasses.replace(self.cfg, seed=seed))


def run_monte_carlo(cfg: ScenarioConfig, mc: MCConfig = MCConfig()) -> MCResult:
    base = cfg.seed if mc.base_seed is None else mc.base_seed
    meta = {"scenario": dataclasses.asdict(cfg)}
    if mc.jobs > 1:
        with ProcessPoolExecutor(mc.jobs) as pool:
            return monte_carlo(_BoundReplica(cfg), mc, base, pool, meta)
    return monte_carlo(_BoundReplica(cfg), mc, base, None, meta)


# ------------------------------------------------------------------ grids


@dataclass(frozen=True)
class ScenarioGrid:
    base: ScenarioConfig
    attacker_shares: tuple[float, ...] = DEFAULT_SHARES
    strategies: tuple[Strategy, ...] = tuple(Strategy)
    duration_models: tuple[DurationKind, ...] = (DurationKind.EXPONENTIAL,
                                                  DurationKind.LOGNORMAL)

    def __post_init__(self):
        object.__setattr__(self, "attacker_shares", tuple(self.attacker_shares))
        object.__setattr__(self, "strategies", tuple(Strategy(s) for s in self.strategies))
        object.__setattr__(self, "duration_models",
                           tuple(DurationKind(m) for m in self.duration_models))
        if not (self.attacker_shares and self.strategies and self.duration_models):
            raise ValueError("every grid axis needs at least one value")

    def cells(self) -> list[tuple[float, Strategy, DurationKind]]:
        return list(itertools.product(self.attacker_shares, self.strategies,
                                      self.duration_models))

    def scenario(self, share: float, strategy: Strategy, model: DurationKind) -> ScenarioConfig:
        defense = dataclasses.replace(self.base.defense, strategy=strategy)
        return dataclasses.replace(self.base, attacker_share=share,
                                   duration_model=model, defense=defense)


@dataclass
class CellFailure:
    error: str


def run_grid(grid: ScenarioGrid, mc: MCConfig = MCConfig(),
             measures_for: Callable[[float, Strategy, DurationKind], Sequence[str]] | None = None,
             ) -> dict[tuple[float, Strategy, DurationKind], MCResult | CellFailure]:
    """One Monte-Carlo result per cell; a failing cell does not stop the others.

    Every cell uses the same base seed (common random numbers across cells).
    ``measures_for`` can narrow the tracked measures per cell.
    """
    out = {}
    pool = ProcessPoolExecutor(mc.jobs) if mc.jobs > 1 else None
    try:
        for cell in grid.cells():
            share, strategy, model = cell
            try:
                cfg = grid.scenario(*cell)
                cell_mc = mc
                if measures_for is not None:
                    cell_mc = dataclasses.replace(mc, measures=tuple(measures_for(*cell)))
                base = cfg.seed if mc.base_seed is None else mc.base_seed
                out[cell] = monte_carlo(_BoundReplica(cfg), cell_mc, base, pool,
                                        {"cell": [share, strategy.value, model.value]})
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                log.error("cell %s failed: %s", cell, exc)
                out[cell] = CellFailure(f"{type(exc).__name__}: {exc}")
    finally:
        if pool is not None:
            pool.shutdown()
    return out


def occupancy_profile(cfg: ScenarioConfig, runs: int, base_seed: int | None = None
                      ) -> list[tuple[float, float]]:
    """Attacker occupancy fraction at each sampling instant, averaged over replicas."""
    base = cfg.seed if base_seed is None else base_seed
    sums: list[float] = []
    times: list[float] = []
    for i in range(runs):
        trace = run_scenario(dataclasses.replace(cfg, seed=replica_seed(base, i)))
        samples = trace.occupancy_samples
        if not sums:
            times = [t for t, _, _ in samples]
            sums = [0.0] * len(samples)
        for j, (_, a, _) in enumerate(samples):
            sums[j] += a / trace.k
    return [(t, s / runs) for t, s in zip(times, sums)]


def desk_scenario(**overrides) -> ScenarioConfig:
    """The desk-scale simulation setting: k=24, t_M=5, total=40, delay=0.1, R at 80% load."""
    defense_keys = {f.name for f in dataclasses.fields(DefenseParams)}
    d = {k: overrides.pop(k) for k in list(overrides) if k in defense_keys}
    defense = DefenseParams(**d)
    overrides.setdefault("rate", size_rate(defense.k, defense.t_M, utilization=0.8))
    return ScenarioConfig(defense=defense, **overrides)
