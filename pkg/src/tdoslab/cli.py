"""Command-line front end: ``tdoslab run|sweep|report|size|selftest``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import LoadedConfig, load_config
from .domain import ConfigError
from .engine import run_scenario
from .experiment import CellFailure, SizingError, run_grid, size_rate
from .metrics import compute_measures
from .report import (OCCUPANCY_COLUMNS, COLUMNS, ReportError, RunRow, atomic_write,
                     charts_for_rows, occupancy_svg, occupancy_to_csv, parse_occupancy,
                     parse_rows, rows_to_csv, scenario_id)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_NOT_CONVERGED = 0, 1, 2, 3
SEED_ENV = "TDOSLAB_SEED"

log = logging.getLogger("tdoslab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tdoslab", description="Coordinated Call TDoS / SeVen simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, mc=True):
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--seed", type=_u64, metavar="U64")
        sp.add_argument("--out", default="out", metavar="DIR")
        if mc:
            sp.add_argument("--jobs", type=int, metavar="N")
            sp.add_argument("--delta", type=float, metavar="FLOAT")
            sp.add_argument("--confidence", type=float, metavar="FLOAT")
            sp.add_argument("--strict", action="store_true",
                            help="exit 3 when any Monte-Carlo estimate did not converge")

    common(sub.add_parser("run", help="one replica: measures and occupancy series"), mc=False)
    common(sub.add_parser("sweep", help="Monte-Carlo over the scenario grid"))

    rp = sub.add_parser("report", help="SVG charts from results or occupancy CSVs")
    rp.add_argument("csv", nargs="+", metavar="CSV")
    rp.add_argument("--out", default="out", metavar="DIR")

    sp = sub.add_parser("size", help="call rate for k slots and mean duration t_M")
    sp.add_argument("k", type=int)
    sp.add_argument("t_M", type=float)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--utilization", type=float)
    g.add_argument("--blocking", type=float)

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return p


def resolve_seed(flag: Optional[int], config_seed: int,
                 env: Optional[dict] = None) -> tuple[int, bool]:
    """Seed by precedence flag > environment > config; second item says if it was overridden."""
    if flag is not None:
        return flag, True
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV)
    if raw not in (None, ""):
        try:
            return _u64(raw), True
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(f"{SEED_ENV}: {raw!r} is not an unsigned 64-bit integer") from None
    return config_seed, False


def _load(args) -> LoadedConfig:
    cfg = load_config(args.config)
    seed, overridden = resolve_seed(args.seed, cfg.scenario.seed)
    scenario = dataclasses.replace(cfg.scenario, seed=seed)
    mc = cfg.mc
    changes = {}
    if overridden:
        changes["base_seed"] = seed
    for name in ("jobs", "delta", "confidence"):
        v = getattr(args, name, None)
        if v is not None:
            changes[name] = v
    if changes:
        try:
            mc = dataclasses.replace(mc, **changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if mc.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    grid = dataclasses.replace(cfg.grid, base=scenario)
    return LoadedConfig(scenario, mc, grid, cfg.source)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def calls_to_csv(trace) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["actor", "honest", "invited_at", "incall_at", "intended_duration",
                "outcome", "talked_fraction", "retries"])
    for r in trace.records:
        w.writerow([str(r.actor), "true" if r.honest else "false",
                    *("" if v is None else repr(float(v))
                      for v in (r.invited_at, r.incall_at, r.intended_duration)),
                    r.outcome.value,
                    "" if r.talked_fraction is None else repr(r.talked_fraction),
                    r.retries])
    return buf.getvalue()


def cmd_run(args) -> int:
    cfg = _load(args)
    trace = run_scenario(cfg.scenario)
    m = compute_measures(trace)
    out = Path(args.out)
    payload = {"measures": m.as_dict(), "metadata": trace.metadata}
    atomic_write(out / "measures.json", _json(payload))
    atomic_write(out / "occupancy.csv", occupancy_to_csv(trace.occupancy_samples, trace.k))
    atomic_write(out / "calls.csv", calls_to_csv(trace))
    print(f"complete={m.complete} incomplete={m.incomplete} unsuccessful={m.unsuccessful} "
          f"avg_incall={m.avg_incall} -> {out}")
    return EXIT_OK


def result_row(share, strategy, model, res, seed: int) -> RunRow:
    sid = scenario_id(strategy.value, model.value, share)
    if isinstance(res, CellFailure):
        return RunRow(sid, strategy.value, model.value, share, *([None] * 9), runs=0,
                      converged=False, seed=seed, status=f"failed: {res.error}")

    def get(name, attr):
        s = res.measures.get(name)
        if s is None or s.runs_used == 0:
            return None
        return getattr(s, attr)

    vals = []
    for name in ("complete", "incomplete", "unsuccessful", "avg_incall"):
        vals += [get(name, "mean"), get(name, "halfwidth")]
    return RunRow(sid, strategy.value, model.value, share, *vals,
                  occupancy_mean=get("occupancy", "mean"), runs=res.runs,
                  converged=res.converged, seed=seed,
                  status="ok" if res.converged else "not-converged")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    mc = cfg.mc
    if "occupancy" not in mc.measures:
        mc = dataclasses.replace(mc, measures=mc.measures + ("occupancy",))
    seed = cfg.scenario.seed if mc.base_seed is None else mc.base_seed
    results = run_grid(cfg.grid, mc)
    rows = [result_row(*cell, res, seed) for cell, res in results.items()]
    out = Path(args.out)
    atomic_write(out / "results.csv", rows_to_csv(rows))
    failed = sum(r.status.startswith("failed") for r in rows)
    unconverged = sum(not r.converged for r in rows)
    print(f"{len(rows)} rows ({failed} failed, {unconverged} not converged) -> "
          f"{out / 'results.csv'}")
    if failed:
        return EXIT_RUNTIME
    if args.strict and unconverged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_report(args) -> int:
    files: dict[str, str] = {}
    for path in args.csv:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ReportError(f"cannot read {p}: {exc.strerror}") from None
        header = text.split("\n", 1)[0].strip().split(",")
        if header == OCCUPANCY_COLUMNS:
            series = parse_occupancy(text, str(p))
            files[f"occupancy_{p.stem}.svg"] = occupancy_svg(
                series, f"Attacker call occupancy in buffer: {p.stem}")
        elif header == COLUMNS:
            files.update(charts_for_rows(parse_rows(text, str(p))))
        elif not text.strip():
            raise ReportError(f"{p}: empty CSV")
        else:
            raise ReportError(f"{p}: row 1: header matches neither the results nor "
                              f"the occupancy schema")
    if not files:
        raise ReportError("nothing to chart: every result row failed")
    out = Path(args.out)
    for name, svg in sorted(files.items()):
        atomic_write(out / name, svg)
    print(f"{len(files)} charts -> {out}")
    return EXIT_OK


def cmd_size(args) -> int:
    util = args.utilization
    if util is None and args.blocking is None:
        util = 0.8
    rate = size_rate(args.k, args.t_M, utilization=util, blocking=args.blocking)
    print(repr(rate))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_RUNTIME


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "report": cmd_report,
            "size": cmd_size, "selftest": cmd_selftest}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SizingError, ReportError) as exc:
        print(f"tdoslab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"tdoslab: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
