"""Admission probability, dropping factor and victim selection."""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .domain import BufferEntry, CallPhase, DefenseParams, Strategy
from .stochastic import RandomStream

# math.exp overflows just above 709
_MAX_EXPONENT = 700.0


class EmptyBufferError(ValueError):
    pass


def admission_probability(k: int, factor: float) -> float:
    """Probability of processing a request that arrives at a full buffer."""
    if k < 1 or factor < 0:
        raise ValueError("need k >= 1 and factor >= 0")
    return k / (k + factor)


def drop_factor(phase: CallPhase, elapsed: float, p: DefenseParams) -> float:
    """Dropping weight of a call.

    Waiting calls weigh ``p_wait`` however long they have waited. Calls in
    progress weigh ``p_in`` up to the mean duration ``t_M``, then
    ``p_wait + exp(alpha * elapsed / t_M)``.
    """
    if phase is CallPhase.WAIT:
        return p.p_wait
    if elapsed <= p.t_M:
        return p.p_in
    return p.p_wait + math.exp(min(p.alpha * elapsed / p.t_M, _MAX_EXPONENT))


def entry_factor(entry: BufferEntry, now: float, p: DefenseParams) -> float:
    if entry.phase is CallPhase.WAIT:
        return p.p_wait
    return drop_factor(CallPhase.IN, now - entry.stamp, p)


def weights(buf: Sequence[BufferEntry], now: float, p: DefenseParams) -> list[float]:
    return [entry_factor(e, now, p) for e in buf]


def _check(buf) -> int:
    n = len(buf)
    if n == 0:
        raise EmptyBufferError("cannot select from an empty buffer")
    return n


def select_uniform(buf: Sequence[BufferEntry], rs: RandomStream) -> int:
    return rs.randbelow(_check(buf))


def roulette_index(ws: Sequence[float], r: float) -> int:
    """Index whose cumulative-weight interval ``[lo, hi)`` contains ``r``."""
    acc = 0.0
    for i, w in enumerate(ws):
        acc += w
        if r < acc:
            return i
    # r landed on the rounding edge of the last interval
    return len(ws) - 1


def select_roulette(buf: Sequence[BufferEntry], now: float, p: DefenseParams,
                    rs: RandomStream) -> int:
    _check(buf)
    ws = weights(buf, now, p)
    return roulette_index(ws, rs.random() * math.fsum(ws))


def select_tournament(buf: Sequence[BufferEntry], now: float, p: DefenseParams,
                      rs: RandomStream, n: int | None = None) -> int:
    size = _check(buf)
    n = min(p.n if n is None else n, size)
    contenders = rs.sample_indices(size, n)
    factors = {i: entry_factor(buf[i], now, p) for i in contenders}
    best = max(factors.values())
    top = [i for i in contenders if factors[i] == best]
    if len(top) == 1:
        return top[0]
    return top[rs.randbelow(len(top))]


Selector = Callable[[Sequence[BufferEntry], float, DefenseParams, RandomStream], int]


def selector_for(strategy: Strategy) -> Selector:
    strategy = Strategy(strategy)
    if strategy is Strategy.UNIFORM:
        return lambda buf, now, p, rs: select_uniform(buf, rs)
    if strategy is Strategy.ROULETTE:
        return select_roulette
    if strategy is Strategy.TOURNAMENT:
        return select_tournament
    raise ValueError("no-defense mode never selects a victim")
