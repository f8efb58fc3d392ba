"""Fast built-in oracle checks, run by ``tdoslab selftest``."""

from __future__ import annotations

import math
from collections import Counter

from scipy import stats

from .domain import ActorId, ActorKind, BufferEntry, CallPhase, DefenseParams, DurationKind, Outcome
from .experiment import erlang_b, desk_scenario, size_rate
from .engine import run_scenario
from .metrics import compute_measures
from .stochastic import DurationModel, RandomStream, sample_duration
from .strategy import drop_factor, roulette_index, select_tournament


def _roulette() -> bool:
    rs = RandomStream(1)
    ws = (2.0, 3.0, 1.0, 6.0)
    n = 100_000
    counts = Counter(roulette_index(ws, rs.random() * 12.0) for _ in range(n))
    return all(abs(counts[i] / n - w / 12) <= 0.01 for i, w in enumerate(ws))


def _tournament() -> bool:
    p = DefenseParams(k=6, n=6)
    # elapsed 0, 3, 6, ... so every call past t_M has a distinct factor
    buf = [BufferEntry(ActorId(ActorKind.CLIENT, i), CallPhase.IN, -3.0 * i) for i in range(6)]
    rs = RandomStream(2)
    best = max(range(6), key=lambda i: drop_factor(CallPhase.IN, 3.0 * i, p))
    if any(select_tournament(buf, 0.0, p, rs) != best for _ in range(2000)):
        return False
    p1 = DefenseParams(k=6, n=1)
    counts = Counter(select_tournament(buf, 0.0, p1, rs) for _ in range(10_000))
    return stats.chisquare([counts[i] for i in range(6)]).pvalue > 0.01


def _samplers() -> bool:
    rs = RandomStream(3)
    ok = sample_duration(rs, DurationModel(DurationKind.FIXED, 5.0)) == 5.0
    for kind in (DurationKind.EXPONENTIAL, DurationKind.LOGNORMAL):
        m = DurationModel(kind, 5.0, 0.8)
        mean = math.fsum(sample_duration(rs, m) for _ in range(200_000)) / 200_000
        ok &= abs(mean - 5.0) / 5.0 < 0.02
    return ok


def _erlang() -> bool:
    return (erlang_b(1, 1) == 0.5 and erlang_b(2, 2) == 0.4 and erlang_b(7.5, 0) == 1.0
            and abs(size_rate(200, 160 / 60, utilization=0.8) - 60.0) < 1e-9)


def _conservation() -> bool:
    for seed in range(5):
        m = compute_measures(run_scenario(desk_scenario(attacker_share=0.5, seed=seed)))
        if m.count_complete + m.count_incomplete + m.count_unsuccessful + m.censored \
                != m.count_honest:
            return False
    return True


def _determinism() -> bool:
    cfg = desk_scenario(attacker_share=0.83, strategy="roulette", seed=9)
    a, b = run_scenario(cfg), run_scenario(cfg)
    return ([(r.actor, r.outcome, r.talked_fraction) for r in a.records]
            == [(r.actor, r.outcome, r.talked_fraction) for r in b.records]
            and a.occupancy_samples == b.occupancy_samples)


def _no_defense() -> bool:
    cfg = desk_scenario(attacker_share=0.83, strategy="none", seed=4)
    trace = run_scenario(cfg)
    return not any(r.outcome is Outcome.INCOMPLETE for r in trace.records)


CHECKS = {
    "roulette frequencies": _roulette,
    "tournament argmax and n=1 uniformity": _tournament,
    "duration sampler means": _samplers,
    "erlang-b and rate sizing": _erlang,
    "call conservation": _conservation,
    "replica determinism": _determinism,
    "no incomplete calls without defense": _no_defense,
}


def run_selftest(out=print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            passed = bool(check())
        except Exception as exc:  # noqa: BLE001 - reported as a failure
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
