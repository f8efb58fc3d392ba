"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py). Thresholds are checked as stated, with no slack
added for Monte-Carlo noise beyond the 99% / 0.01 stopping rule.
"""

import dataclasses
import math
import random
from collections import Counter

import pytest
from scipy import stats

from tdoslab import MCConfig, compute_measures, desk_scenario, run_monte_carlo, run_scenario
from tdoslab.cli import main
from tdoslab.domain import BufferEntry, CallPhase, DefenseParams, DurationKind, Strategy
from tdoslab.engine import Simulation
from tdoslab.experiment import DEFAULT_SHARES, erlang_b, monte_carlo, occupancy_profile, size_rate
from tdoslab.stochastic import DurationModel, RandomStream, sample_duration
from tdoslab.strategy import roulette_index, select_tournament, select_uniform, weights

from conftest import client, record_criterion

SEED = 20240601
MC = MCConfig(confidence=0.99, delta=0.01)


def _mc(strategy, model, share, measures):
    cfg = desk_scenario(strategy=strategy, duration_model=model, attacker_share=share,
                         seed=SEED)
    return run_monte_carlo(cfg, dataclasses.replace(MC, measures=measures))


def _fmt(res, names):
    return " ".join(f"{n}={res.mean(n):.4f}±{res.halfwidth(n):.4f}" for n in names)


def test_c01_attack_efficacy_without_defense():
    res = _mc("none", "lognormal", 0.83, ("complete", "incomplete", "unsuccessful"))
    ok = (res.mean("unsuccessful") >= 0.80 and res.mean("complete") <= 0.20
          and res.mean("incomplete") == 0.0)
    record_criterion(1, ok, _fmt(res, ("unsuccessful", "complete", "incomplete"))
                     + " (need U>=0.80, C<=0.20, I=0)")
    assert ok


def _across_shares(strategy, model, thresholds):
    worst = {}
    lines = []
    for share in DEFAULT_SHARES:
        res = _mc(strategy, model, share, tuple(thresholds))
        lines.append(f"{share}: {_fmt(res, thresholds)}")
        for name in thresholds:
            v = res.mean(name)
            worst[name] = v if name not in worst else min(worst[name], v)
    ok = all(worst[n] >= t for n, t in thresholds.items())
    need = ", ".join(f"min {n}={worst[n]:.4f} need>={t}" for n, t in thresholds.items())
    return ok, f"{strategy}/{model}: {need} [{'; '.join(lines)}]"


@pytest.mark.parametrize("model, threshold", [("exponential", 0.52), ("lognormal", 0.76)])
def test_c02_tournament(model, threshold):
    ok, detail = _across_shares("tournament", model, {"complete": threshold})
    record_criterion(2, ok, detail)
    assert ok


@pytest.mark.parametrize("model, c_min, avg_min", [("exponential", 0.50, 0.60),
                                                   ("lognormal", 0.70, 0.78)])
def test_c03_roulette(model, c_min, avg_min):
    ok, detail = _across_shares("roulette", model, {"complete": c_min, "avg_incall": avg_min})
    record_criterion(3, ok, detail)
    assert ok


@pytest.mark.parametrize("model, threshold", [("exponential", 0.50), ("lognormal", 0.70)])
def test_c04_uniform(model, threshold):
    ok, detail = _across_shares("uniform", model, {"complete": threshold})
    record_criterion(4, ok, detail)
    assert ok


def test_c05_occupancy_shape():
    runs = 200
    base = dict(attacker_share=0.83, duration_model="lognormal", seed=SEED)
    nd = occupancy_profile(desk_scenario(strategy="none", **base), runs)
    first = next((i for i, (_, f) in enumerate(nd) if f >= 0.95), None)
    nd_ok = first is not None and all(f >= 0.95 for _, f in nd[first:])
    details = [f"none reaches 0.95 at t={nd[first][0]:.1f}, min after={min(f for _, f in nd[first:]):.3f}"
               if first is not None else "none never reaches 0.95"]
    seven_ok = True
    for strategy in ("uniform", "roulette", "tournament"):
        prof = occupancy_profile(desk_scenario(strategy=strategy, **base), runs)
        # plateau: second half of the horizon
        tail = [f for t, f in prof if t >= 20.0]
        plateau = sum(tail) / len(tail)
        seven_ok &= plateau <= 0.85
        details.append(f"{strategy} plateau={plateau:.3f}")
    ok = nd_ok and seven_ok
    record_criterion(5, ok, "; ".join(details) + " (need none>=0.95 and stays, SeVen<=0.85)")
    assert ok


def test_c06_conservation():
    rng = random.Random(SEED)
    bad = 0
    n = 0
    for strategy in Strategy:
        for model in DurationKind:
            for share in (0.0,) + DEFAULT_SHARES + (1.0,):
                for _ in range(3):
                    cfg = desk_scenario(strategy=strategy, duration_model=model,
                                         attacker_share=share, seed=rng.getrandbits(64))
                    m = compute_measures(run_scenario(cfg))
                    n += 1
                    bad += (m.count_complete + m.count_incomplete + m.count_unsuccessful
                            + m.censored != m.count_honest)
    ok = bad == 0
    record_criterion(6, ok, f"{n} runs, {bad} violations")
    assert ok


def test_c07_strategy_oracles():
    rs = RandomStream(SEED)
    n = 100_000
    ws = (2.0, 3.0, 1.0, 6.0)
    c = Counter(roulette_index(ws, rs.random() * math.fsum(ws)) for _ in range(n))
    freqs = [c[i] / n for i in range(4)]
    roulette_ok = all(abs(f - e) <= 0.01 for f, e in zip(freqs, (1 / 6, 1 / 4, 1 / 12, 1 / 2)))

    now = 30.0
    buf = [BufferEntry(client(0)), BufferEntry(client(1), CallPhase.IN, 29.0),
           BufferEntry(client(2), CallPhase.IN, 20.0), BufferEntry(client(3), CallPhase.IN, 26.0)]
    p1 = DefenseParams(k=4, n=1)
    t = Counter(select_tournament(buf, now, p1, rs) for _ in range(10_000))
    u = Counter(select_uniform(buf, rs) for _ in range(10_000))
    pval = stats.chi2_contingency([[t[i] for i in range(4)], [u[i] for i in range(4)]]).pvalue

    pk = DefenseParams(k=4, n=4)
    w = weights(buf, now, pk)
    best = {i for i, x in enumerate(w) if x == max(w)}
    hits = sum(select_tournament(buf, now, pk, rs) in best for _ in range(10_000))

    ok = roulette_ok and pval > 0.01 and hits == 10_000
    record_criterion(7, ok, f"roulette freqs={[round(f, 4) for f in freqs]}, "
                            f"1-tournament vs uniform p={pval:.3f}, k-tournament max {hits}/10000")
    assert ok


def test_c08_sample_execution_replay():
    from tdoslab.domain import CallRecord, Content
    from tdoslab.engine import ClientState, ClientStatus
    from conftest import quiet_config

    p = DefenseParams(k=3, t_M=5.0, Ts=9.5, strategy=Strategy.ROULETTE)
    ids = {i: client(i) for i in range(1, 5)}

    def forced(buffer, now, params, rs):
        return [e.actor for e in buffer].index(ids[2])

    sim = Simulation(quiet_config(defense=p, total=11.0), selector=forced)
    for i, status in ((1, ClientStatus.INVITE), (2, ClientStatus.CONNECTED),
                      (3, ClientStatus.NONE), (4, ClientStatus.NONE)):
        sim.clients[ids[i]] = ClientState(ids[i], True, 5.0, status)
        sim.records[ids[i]] = CallRecord(ids[i], True, 0.0, 0.5 if i == 2 else None, 5.0)
    sim.load_buffer([BufferEntry(ids[1]), BufferEntry(ids[2], CallPhase.IN, 0.5)])
    sim.sched.now = 9.0
    sim.start()

    def run_to(t):
        while (h := sim.sched.peek()) is not None and h.due <= t:
            sim.step()
        return sim.server.buffer.snapshot()

    W, IN = CallPhase.WAIT, CallPhase.IN
    trace = [sim.server.buffer.snapshot(), run_to(9.5)]
    sim.sched.schedule(9.9, ids[3], Content.POLL)
    trace.append(run_to(10.0))
    sim.sched.schedule(10.4, ids[4], Content.POLL)
    trace.append(run_to(10.5))
    expected = [
        [(ids[1], W, None), (ids[2], IN, 0.5)],
        [(ids[1], IN, 9.5), (ids[2], IN, 0.5)],
        [(ids[1], IN, 9.5), (ids[2], IN, 0.5), (ids[3], W, None)],
        [(ids[1], IN, 9.5), (ids[4], W, None), (ids[3], W, None)],
    ]
    ok = trace == expected
    record_criterion(8, ok, "B1..B4 " + ("match" if ok else f"differ: {trace}"))
    assert ok


def test_c09_samplers():
    rs = RandomStream(SEED)
    n = 1_000_000
    errs = {}
    for kind in (DurationKind.EXPONENTIAL, DurationKind.LOGNORMAL):
        m = DurationModel(kind, 5.0, 0.8)
        errs[kind.value] = abs(math.fsum(sample_duration(rs, m) for _ in range(n)) / n - 5) / 5
    fixed = sample_duration(rs, DurationModel(DurationKind.FIXED, 5.0)) == 5.0
    ok = all(e < 0.01 for e in errs.values()) and fixed
    record_criterion(9, ok, ", ".join(f"{k} rel err={e:.5f}" for k, e in errs.items())
                     + f", fixed exact={fixed}")
    assert ok


def test_c10_erlang():
    vals = (erlang_b(1, 1), erlang_b(2, 2), erlang_b(5.5, 0))
    per_min = size_rate(200, 160.0, utilization=0.8) * 60
    ok = vals == (0.5, 0.4, 1.0) and per_min == 60.0
    record_criterion(10, ok, f"B(1,1)={vals[0]!r} B(2,2)={vals[1]!r} B(E,0)={vals[2]!r} "
                             f"size_rate={per_min!r}/min")
    assert ok


def test_c11_statistical_harness():
    def bern(seed):
        return {"complete": float(random.Random(seed).random() < 0.5)}

    mc = MCConfig(confidence=0.99, delta=0.02, measures=("complete",))
    covered = sum(abs(r.mean("complete") - 0.5) <= r.halfwidth("complete")
                  for r in (monte_carlo(bern, mc, base_seed=SEED + i) for i in range(200)))
    zero = monte_carlo(lambda s: {"complete": 0.3}, dataclasses.replace(mc, min_runs=30), 1)
    ok = covered >= 194 and zero.runs == 30 and zero.converged
    record_criterion(11, ok, f"coverage {covered}/200 (need >=194), "
                             f"zero-variance stopped at {zero.runs}")
    assert ok


def test_c12_determinism(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("[scenario]\nseed = 5\n[defense]\nk = 24\nt_M = 5\n"
                   "[mc]\ndelta = 0.05\nmax_runs = 200\n"
                   "[grid]\nattacker_shares = 0.5, 0.83\nstrategies = none, roulette\n"
                   "duration_models = lognormal\n")
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["sweep", "--config", str(cfg), "--seed", "11", "--out", str(d)]) == 0
        assert main(["run", "--config", str(cfg), "--seed", "11", "--out", str(d)]) == 0
        assert main(["report", str(d / "results.csv"), str(d / "occupancy.csv"),
                     "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    ok = outs[0] == outs[1] and any(n.endswith(".svg") for n in outs[0])
    record_criterion(12, ok, f"{len(outs[0])} files compared byte for byte")
    assert ok
