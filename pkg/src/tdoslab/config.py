"""INI-style scenario files with [scenario], [defense], [mc] and [grid] sections.

Recognised keys (defaults in parentheses)::

    [scenario]
    total (40)          delay (0.1)         attacker_share (0)
    rate                utilization (0.8)   blocking
    duration_model (lognormal)              sigma (0.8)
    arrivals (poisson)  seed (0)            retry_rejected (false)
    max_retries (0)     time_unit (minute)

    [defense]
    k, t_M              required
    strategy (tournament)  Ts (0.1)  p_wait (8)  p_in (2)  alpha (1.89)
    n (k // 2)

    [mc]
    confidence (0.99)  delta (0.01)  min_runs (30)  max_runs (2000)
    base_seed (scenario seed)        measures (complete, incomplete, unsuccessful, avg_incall)

    [grid]
    attacker_shares (0.17, 0.33, 0.50, 0.67, 0.83)
    strategies (none, uniform, roulette, tournament)
    duration_models (exponential, lognormal)

Give at most one of ``rate``, ``utilization`` and ``blocking``; the latter two
size R from k and t_M. Keys are case-sensitive.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .domain import (ArrivalMode, ConfigError, DefenseParams, DurationKind, ScenarioConfig,
                     Strategy)
from .experiment import MCConfig, DEFAULT_SHARES, ScenarioGrid, SizingError, size_rate

KEYS = {
    "scenario": {"total", "delay", "rate", "utilization", "blocking", "attacker_share",
                 "duration_model", "sigma", "arrivals", "seed", "retry_rejected",
                 "max_retries", "time_unit"},
    "defense": {"k", "t_M", "strategy", "Ts", "p_wait", "p_in", "alpha", "n"},
    "mc": {"confidence", "delta", "min_runs", "max_runs", "base_seed", "measures"},
    "grid": {"attacker_shares", "strategies", "duration_models"},
}
REQUIRED = {"defense": ("k", "t_M")}


@dataclass
class LoadedConfig:
    scenario: ScenarioConfig
    mc: MCConfig
    grid: ScenarioGrid
    source: str = ""


class _Section:
    def __init__(self, name: str, items: dict[str, str]):
        self.name = name
        self.items = items

    def _get(self, key, conv, default):
        if key not in self.items:
            return default
        raw = self.items[key].strip()
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{self.name}.{key}: cannot parse {raw!r} ({exc})") from None

    def float(self, key, default=None):
        return self._get(key, float, default)

    def int(self, key, default=None):
        return self._get(key, lambda s: int(s, 0), default)

    def str(self, key, default=None):
        return self._get(key, str, default)

    def bool(self, key, default=False):
        def conv(s):
            low = s.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        return self._get(key, conv, default)

    def list(self, key, conv, default):
        return self._get(key, lambda s: tuple(conv(x.strip()) for x in s.split(",") if x.strip()),
                         default)


def parse_config(text: str, source: str = "<string>") -> LoadedConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for section in cp.sections():
        if section not in KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in KEYS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
    for section, keys in REQUIRED.items():
        for key in keys:
            if not cp.has_option(section, key):
                raise ConfigError(f"{section}.{key} required")

    sec = {name: _Section(name, dict(cp[name]) if cp.has_section(name) else {})
           for name in KEYS}
    d, s, m, g = sec["defense"], sec["scenario"], sec["mc"], sec["grid"]

    defense = DefenseParams(
        k=d.int("k"),
        t_M=d.float("t_M"),
        strategy=_enum(Strategy, d.str("strategy", "tournament"), "defense.strategy"),
        Ts=d.float("Ts", 0.1),
        p_wait=d.float("p_wait", 8.0),
        p_in=d.float("p_in", 2.0),
        alpha=d.float("alpha", 1.89),
        n=d.int("n"),
    )

    sizing = [key for key in ("rate", "utilization", "blocking") if key in s.items]
    if len(sizing) > 1:
        raise ConfigError(f"scenario: give only one of {', '.join(sizing)}")
    try:
        if "rate" in s.items:
            rate = s.float("rate")
        elif "blocking" in s.items:
            rate = size_rate(defense.k, defense.t_M, blocking=s.float("blocking"))
        else:
            rate = size_rate(defense.k, defense.t_M, utilization=s.float("utilization", 0.8))
    except SizingError as exc:
        raise ConfigError(f"scenario.{sizing[0] if sizing else 'utilization'}: {exc}") from None

    scenario = ScenarioConfig(
        rate=rate,
        defense=defense,
        total=s.float("total", 40.0),
        delay=s.float("delay", 0.1),
        attacker_share=s.float("attacker_share", 0.0),
        duration_model=_enum(DurationKind, s.str("duration_model", "lognormal"),
                             "scenario.duration_model"),
        sigma=s.float("sigma", 0.8),
        arrivals=_enum(ArrivalMode, s.str("arrivals", "poisson"), "scenario.arrivals"),
        seed=s.int("seed", 0),
        retry_rejected=s.bool("retry_rejected", False),
        max_retries=s.int("max_retries", 0),
        time_unit=s.str("time_unit", "minute"),
    )

    try:
        mc = MCConfig(
            confidence=m.float("confidence", 0.99),
            delta=m.float("delta", 0.01),
            min_runs=m.int("min_runs", 30),
            max_runs=m.int("max_runs", 2000),
            base_seed=m.int("base_seed"),
            measures=m.list("measures", str, MCConfig.measures),
        )
    except ValueError as exc:
        raise ConfigError(f"mc: {exc}") from None

    strategies = g.list("strategies", str, tuple(x.value for x in Strategy))
    models = g.list("duration_models", str, ("exponential", "lognormal"))
    try:
        grid = ScenarioGrid(
            base=scenario,
            attacker_shares=g.list("attacker_shares", float, DEFAULT_SHARES),
            strategies=tuple(_enum(Strategy, x, "grid.strategies") for x in strategies),
            duration_models=tuple(_enum(DurationKind, x, "grid.duration_models") for x in models),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    return LoadedConfig(scenario, mc, grid, source)


def _enum(cls, value: Optional[str], key: str):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(x.value for x in cls)
        raise ConfigError(f"{key}: {value!r} is not one of {choices}") from None


def load_config(path) -> LoadedConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
