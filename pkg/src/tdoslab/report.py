"""Result rows (CSV) and static SVG charts."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, fields
from html import escape
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .domain import Strategy

STATUS_OK = "ok"


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class RunRow:
    scenario_id: str
    strategy: str
    duration_model: str
    attacker_share: float
    complete_mean: Optional[float]
    complete_hw: Optional[float]
    incomplete_mean: Optional[float]
    incomplete_hw: Optional[float]
    unsuccessful_mean: Optional[float]
    unsuccessful_hw: Optional[float]
    avg_incall_mean: Optional[float]
    avg_incall_hw: Optional[float]
    occupancy_mean: Optional[float]
    runs: int
    converged: bool
    seed: int
    status: str = STATUS_OK

    def sort_key(self):
        return (self.strategy, self.duration_model, self.attacker_share)


COLUMNS = [f.name for f in fields(RunRow)]
_OPTIONAL_FLOATS = {c for c in COLUMNS if c.endswith(("_mean", "_hw"))}
OCCUPANCY_COLUMNS = ["time", "attacker_slots", "total_slots", "attacker_fraction"]


def scenario_id(strategy: str, model: str, share: float) -> str:
    return f"{strategy}-{model}-{share!r}"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        # repr is the shortest string that round-trips
        return repr(v)
    return str(v)


def _write_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def rows_to_csv(rows: Iterable[RunRow]) -> str:
    rows = sorted(rows, key=RunRow.sort_key)
    return _write_csv(COLUMNS, ([getattr(r, c) for c in COLUMNS] for r in rows))


def occupancy_to_csv(samples: Sequence[tuple[float, int, int]], k: int) -> str:
    return _write_csv(OCCUPANCY_COLUMNS, ((float(t), a, n, a / k) for t, a, n in samples))


def _parse_cell(column: str, raw: str, lineno: int):
    def fail(msg):
        raise ReportError(f"row {lineno}, column {column}: {msg} ({raw!r})")

    if column in _OPTIONAL_FLOATS:
        if raw == "":
            return None
        try:
            return float(raw)
        except ValueError:
            fail("expected a number")
    if column == "attacker_share":
        try:
            return float(raw)
        except ValueError:
            fail("expected a number")
    if column in ("runs", "seed"):
        try:
            return int(raw)
        except ValueError:
            fail("expected an integer")
    if column == "converged":
        if raw not in ("true", "false"):
            fail("expected true or false")
        return raw == "true"
    return raw


def _read_table(text: str, source: str):
    if not text.strip():
        raise ReportError(f"{source}: empty CSV")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except csv.Error as exc:
        raise ReportError(f"{source}: {exc}") from None
    return header, reader


def parse_rows(text: str, source: str = "<csv>") -> list[RunRow]:
    header, reader = _read_table(text, source)
    if header != COLUMNS:
        missing = [c for c in COLUMNS if c not in header]
        extra = [c for c in header if c not in COLUMNS]
        raise ReportError(f"{source}: header mismatch (missing {missing}, unexpected {extra})")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(COLUMNS):
            raise ReportError(f"{source}: row {lineno}: expected {len(COLUMNS)} columns, "
                              f"got {len(rec)}")
        values = {c: _parse_cell(c, raw, lineno) for c, raw in zip(COLUMNS, rec)}
        rows.append(RunRow(**values))
    if not rows:
        raise ReportError(f"{source}: no data rows")
    return rows


def parse_occupancy(text: str, source: str = "<csv>") -> list[tuple[float, float]]:
    header, reader = _read_table(text, source)
    if header != OCCUPANCY_COLUMNS:
        raise ReportError(f"{source}: expected header {','.join(OCCUPANCY_COLUMNS)}")
    out = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(OCCUPANCY_COLUMNS):
            raise ReportError(f"{source}: row {lineno}: expected 4 columns, got {len(rec)}")
        try:
            out.append((float(rec[0]), float(rec[3])))
        except ValueError:
            bad = "time" if not _is_float(rec[0]) else "attacker_fraction"
            raise ReportError(f"{source}: row {lineno}, column {bad}: expected a number") from None
    if not out:
        raise ReportError(f"{source}: no data rows")
    return out


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------------- SVG

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 50, 60
COLORS = {"complete": "#2c7fb8", "incomplete": "#fdae61", "unsuccessful": "#d7191c",
          "avg_incall": "#1a9641", "occupancy": "#762a83"}


def _n(x: float) -> str:
    return f"{x:.2f}"


class _Svg:
    def __init__(self, title: str):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2:.0f}" y="25" text-anchor="middle" font-size="15">'
            f'{escape(title)}</text>',
        ]
        self.pw = W - LEFT - RIGHT
        self.ph = H - TOP - BOTTOM

    def y(self, v: float) -> float:
        return TOP + self.ph * (1 - v)

    def add(self, s: str) -> None:
        self.parts.append(s)

    def y_axis(self, label: str) -> None:
        for i in range(6):
            v = i / 5
            y = self.y(v)
            self.add(f'<line x1="{LEFT}" y1="{_n(y)}" x2="{LEFT + self.pw}" y2="{_n(y)}" '
                     f'stroke="#dddddd"/>')
            self.add(f'<text x="{LEFT - 8}" y="{_n(y + 4)}" text-anchor="end">{v:.1f}</text>')
        self.add(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + self.ph}" stroke="black"/>')
        self.add(f'<line x1="{LEFT}" y1="{TOP + self.ph}" x2="{LEFT + self.pw}" '
                 f'y2="{TOP + self.ph}" stroke="black"/>')
        self.add(f'<text x="18" y="{_n(TOP + self.ph / 2)}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {_n(TOP + self.ph / 2)})">{escape(label)}</text>')

    def legend(self, items: Sequence[tuple[str, str]]) -> None:
        x = LEFT + self.pw + 15
        for i, (name, color) in enumerate(items):
            y = TOP + 10 + 20 * i
            self.add(f'<rect x="{x}" y="{y}" width="12" height="12" fill="{color}"/>')
            self.add(f'<text x="{x + 18}" y="{y + 10}">{escape(name)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _share_label(share: float) -> str:
    return f"{round(share * 100):d}%"


def availability_svg(rows: Sequence[RunRow], strategy: str, model: str) -> str:
    """Stacked complete / incomplete / unsuccessful bars per attacker share."""
    rows = sorted(rows, key=lambda r: r.attacker_share)
    svg = _Svg(f"Client success ratio: {_strategy_title(strategy)}, {model} durations")
    svg.y_axis("proportion of legitimate calls")
    slot = svg.pw / max(1, len(rows))
    bw = slot * 0.6
    for i, r in enumerate(rows):
        x = LEFT + slot * i + (slot - bw) / 2
        base = 0.0
        for name in ("complete", "incomplete", "unsuccessful"):
            v = getattr(r, f"{name}_mean")
            if v is None:
                continue
            v = min(max(v, 0.0), 1.0 - base)
            y_top = svg.y(base + v)
            svg.add(f'<rect x="{_n(x)}" y="{_n(y_top)}" width="{_n(bw)}" '
                    f'height="{_n(svg.y(base) - y_top)}" fill="{COLORS[name]}"/>')
            base += v
        svg.add(f'<text x="{_n(x + bw / 2)}" y="{TOP + svg.ph + 18}" text-anchor="middle">'
                f'{_share_label(r.attacker_share)}</text>')
    svg.add(f'<text x="{_n(LEFT + svg.pw / 2)}" y="{H - 15}" text-anchor="middle">'
            f'attacker share of R</text>')
    svg.legend([(n.capitalize(), COLORS[n]) for n in ("complete", "incomplete", "unsuccessful")])
    return svg.render()


def avg_incall_svg(rows: Sequence[RunRow], strategy: str, model: str) -> str:
    rows = sorted(rows, key=lambda r: r.attacker_share)
    svg = _Svg(f"Average time of incomplete calls: {_strategy_title(strategy)}, {model} durations")
    svg.y_axis("fraction of intended duration")
    slot = svg.pw / max(1, len(rows))
    bw = slot * 0.6
    for i, r in enumerate(rows):
        x = LEFT + slot * i + (slot - bw) / 2
        v = r.avg_incall_mean
        if v is not None:
            v = min(max(v, 0.0), 1.0)
            svg.add(f'<rect x="{_n(x)}" y="{_n(svg.y(v))}" width="{_n(bw)}" '
                    f'height="{_n(svg.y(0) - svg.y(v))}" fill="{COLORS["avg_incall"]}"/>')
            hw = r.avg_incall_hw
            if hw is not None and hw > 0:
                cx = x + bw / 2
                lo, hi = max(0.0, v - hw), min(1.0, v + hw)
                svg.add(f'<line x1="{_n(cx)}" y1="{_n(svg.y(lo))}" x2="{_n(cx)}" '
                        f'y2="{_n(svg.y(hi))}" stroke="black"/>')
        else:
            svg.add(f'<text x="{_n(x + bw / 2)}" y="{_n(svg.y(0) - 6)}" '
                    f'text-anchor="middle">n/a</text>')
        svg.add(f'<text x="{_n(x + bw / 2)}" y="{TOP + svg.ph + 18}" text-anchor="middle">'
                f'{_share_label(r.attacker_share)}</text>')
    svg.add(f'<text x="{_n(LEFT + svg.pw / 2)}" y="{H - 15}" text-anchor="middle">'
            f'attacker share of R</text>')
    svg.legend([("avgInCall", COLORS["avg_incall"])])
    return svg.render()


def occupancy_svg(series: Sequence[tuple[float, float]], title: str) -> str:
    svg = _Svg(title)
    svg.y_axis("attacker share of buffer slots")
    t_max = max((t for t, _ in series), default=1.0) or 1.0
    pts = " ".join(f"{_n(LEFT + svg.pw * t / t_max)},{_n(svg.y(min(max(f, 0.0), 1.0)))}"
                   for t, f in series)
    svg.add(f'<polyline points="{pts}" fill="none" stroke="{COLORS["occupancy"]}" '
            f'stroke-width="1.5"/>')
    for i in range(6):
        t = t_max * i / 5
        x = LEFT + svg.pw * i / 5
        svg.add(f'<text x="{_n(x)}" y="{TOP + svg.ph + 18}" text-anchor="middle">{t:g}</text>')
    svg.add(f'<text x="{_n(LEFT + svg.pw / 2)}" y="{H - 15}" text-anchor="middle">time</text>')
    svg.legend([("attacker occupancy", COLORS["occupancy"])])
    return svg.render()


def _strategy_title(strategy: str) -> str:
    return {Strategy.NONE.value: "no defense",
            Strategy.TOURNAMENT.value: "k/2-tournament"}.get(strategy, strategy)


def charts_for_rows(rows: Sequence[RunRow]) -> dict[str, str]:
    """File name to SVG text: availability and avg_incall per (strategy, model)."""
    groups: dict[tuple[str, str], list[RunRow]] = {}
    for r in rows:
        if not r.status.startswith("failed"):
            groups.setdefault((r.strategy, r.duration_model), []).append(r)
    out = {}
    for (strategy, model), group in sorted(groups.items()):
        out[f"availability_{strategy}_{model}.svg"] = availability_svg(group, strategy, model)
        out[f"avg_incall_{strategy}_{model}.svg"] = avg_incall_svg(group, strategy, model)
    return out
