"""Availability measures and buffer occupancy computed from a finished run."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

from .domain import Outcome
from .engine import RunTrace


@dataclass(frozen=True)
class MeasureSet:
    # ratios are None when no honest call resolved before the horizon
    complete: Optional[float]
    incomplete: Optional[float]
    unsuccessful: Optional[float]
    avg_incall: Optional[float]
    # True when avg_incall is the vacuous 1.0 (no incomplete calls)
    avg_incall_vacuous: bool
    count_honest: int
    count_complete: int
    count_incall: int
    count_unsuccessful: int
    total_incomplete_call: int
    total_time_in_call: float
    censored: int
    mean_attacker_occupancy: Optional[float]

    @property
    def count_incomplete(self) -> int:
        return self.count_incall - self.count_complete

    @property
    def resolved(self) -> int:
        return self.count_honest - self.censored

    def as_dict(self) -> dict:
        d = asdict(self)
        d["count_incomplete"] = self.count_incomplete
        return d


def compute_measures(trace: RunTrace) -> MeasureSet:
    honest = complete = incall = unsuccessful = incomplete = censored = 0
    talked = 0.0
    for rec in trace.records:
        if not rec.honest:
            continue
        honest += 1
        o = rec.outcome
        if o is Outcome.COMPLETE:
            complete += 1
            incall += 1
        elif o is Outcome.INCOMPLETE:
            incomplete += 1
            incall += 1
            talked += rec.talked_fraction
        elif o is Outcome.UNSUCCESSFUL:
            unsuccessful += 1
        elif o is Outcome.CENSORED:
            censored += 1
        else:
            raise ValueError(f"{rec.actor} still pending; finish the run first")

    resolved = honest - censored
    if resolved:
        ratios = (complete / resolved, (incall - complete) / resolved,
                  (resolved - incall) / resolved)
    else:
        ratios = (None, None, None)
    vacuous = incomplete == 0
    avg = 1.0 if vacuous else talked / incomplete

    return MeasureSet(
        complete=ratios[0],
        incomplete=ratios[1],
        unsuccessful=ratios[2],
        avg_incall=avg,
        avg_incall_vacuous=vacuous,
        count_honest=honest,
        count_complete=complete,
        count_incall=incall,
        count_unsuccessful=unsuccessful,
        total_incomplete_call=incomplete,
        total_time_in_call=talked,
        censored=censored,
        mean_attacker_occupancy=mean_attacker_occupancy(trace),
    )


def occupancy_series(trace: RunTrace) -> list[tuple[float, float]]:
    """(time, attacker slots / k) at every sampling instant."""
    k = trace.k
    return [(t, a / k) for t, a, _ in trace.occupancy_samples]


def mean_attacker_occupancy(trace: RunTrace) -> Optional[float]:
    """Time-weighted mean of attacker_slots / k.

    Each sample holds until the next one; the last holds until the horizon.
    """
    samples = trace.occupancy_samples
    if not samples:
        return None
    area = 0.0
    span = 0.0
    for i, (t, a, _) in enumerate(samples):
        t_next = samples[i + 1][0] if i + 1 < len(samples) else max(trace.total, t)
        w = t_next - t
        area += w * a
        span += w
    if span == 0:
        return samples[-1][1] / trace.k
    return area / span / trace.k
