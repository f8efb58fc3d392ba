import dataclasses

import pytest

from tdoslab import desk_scenario, run_scenario
from tdoslab.domain import (SERVER, ActorKind, BufferEntry, CallPhase, CallRecord, ConfigError,
                            Content, DefenseParams, Outcome, ScenarioConfig, Strategy)
from tdoslab.engine import ClientState, ClientStatus, Simulation

from conftest import attacker, client, quiet_config


def _add_actor(sim, aid, status, honest=True, duration=5.0, incall_at=None):
    sim.clients[aid] = ClientState(aid, honest, duration if honest else None, status)
    sim.records[aid] = CallRecord(aid, honest, invited_at=0.0, incall_at=incall_at,
                                  intended_duration=duration if honest else None)


def _run_until(sim, t):
    while (head := sim.sched.peek()) is not None and head.due <= t:
        sim.step()


def test_sample_execution_replay():
    """k=3, t_M=5: B1 at 9, answer at 9.5, id3 joins, id4 at 10.5 evicts id2."""
    p = DefenseParams(k=3, t_M=5.0, Ts=9.5, strategy=Strategy.ROULETTE)
    picks = []

    def forced(buf, now, params, rs):
        picks.append([e.actor for e in buf])
        return [e.actor for e in buf].index(client(2))

    sim = Simulation(quiet_config(defense=p, total=11.0), selector=forced)
    ids = {i: client(i) for i in (1, 2, 3, 4)}
    _add_actor(sim, ids[1], ClientStatus.INVITE)
    _add_actor(sim, ids[2], ClientStatus.CONNECTED, incall_at=0.5)
    _add_actor(sim, ids[3], ClientStatus.NONE)
    _add_actor(sim, ids[4], ClientStatus.NONE)
    buf = sim.server.buffer
    sim.load_buffer([BufferEntry(ids[1]), BufferEntry(ids[2], CallPhase.IN, 0.5)])
    sim.sched.now = 9.0
    sim.start()  # round at Ts = 9.5

    assert buf.snapshot() == [(ids[1], CallPhase.WAIT, None), (ids[2], CallPhase.IN, 0.5)]
    _run_until(sim, 9.5)
    assert buf.snapshot() == [(ids[1], CallPhase.IN, 9.5), (ids[2], CallPhase.IN, 0.5)]
    assert sim.clients[ids[1]].status is ClientStatus.CONNECTED

    sim.sched.schedule(9.9, ids[3], Content.POLL)
    _run_until(sim, 10.0)
    assert buf.snapshot() == [(ids[1], CallPhase.IN, 9.5), (ids[2], CallPhase.IN, 0.5),
                              (ids[3], CallPhase.WAIT, None)]
    assert sim.server.factor == 0.0

    sim.sched.schedule(10.4, ids[4], Content.POLL)
    _run_until(sim, 10.5)
    assert buf.snapshot() == [(ids[1], CallPhase.IN, 9.5), (ids[4], CallPhase.WAIT, None),
                              (ids[3], CallPhase.WAIT, None)]
    assert sim.server.factor == 1.0
    assert picks == [[ids[1], ids[2], ids[3]]]
    rec = sim.records[ids[2]]
    assert rec.outcome is Outcome.INCOMPLETE and rec.talked_fraction == 1.0


def test_next_round_rings_waiting_calls():
    p = DefenseParams(k=3, Ts=1.0)
    sim = Simulation(quiet_config(defense=p, total=3.0))
    for i in (3, 4):
        _add_actor(sim, client(i), ClientStatus.INVITE)
    sim.load_buffer([BufferEntry(client(3)), BufferEntry(client(4))])
    sim.server.factor = 5.0
    sim.start()
    _run_until(sim, 1.0)
    assert [e.phase for e in sim.server.buffer] == [CallPhase.IN, CallPhase.IN]
    assert sim.server.factor == 0.0
    assert all(sim.clients[client(i)].status is ClientStatus.CONNECTED for i in (3, 4))
    assert [e.due for e in sim.sched.queue if e.content is Content.ROUND] == [2.0]


def test_round_on_empty_buffer_only_resets():
    sim = Simulation(quiet_config(defense=DefenseParams(Ts=0.5), total=2.0))
    sim.start()
    sim.step()
    assert [(e.due, e.content) for e in sim.sched.queue] == [(1.0, Content.ROUND)]


def test_invite_is_due_after_delay():
    sim = Simulation(quiet_config(delay=0.1))
    _add_actor(sim, client(0), ClientStatus.NONE)
    sim.sched.now = 1.0
    sim.on_client_poll(client(0))
    (evt,) = sim.sched.queue
    assert evt.content is Content.INVITE and evt.target == SERVER and evt.due == 1.1
    sim.on_client_poll(client(0))  # second poll is ignored
    assert len(sim.sched.queue) == 1


def test_bye_is_due_after_intended_duration():
    sim = Simulation(quiet_config())
    _add_actor(sim, client(0), ClientStatus.INVITE, duration=4.2)
    _add_actor(sim, attacker(0), ClientStatus.INVITE, honest=False)
    sim.sched.now = 2.0
    sim.on_client_ringing(client(0))
    sim.on_client_ringing(attacker(0))
    assert [(e.due, e.content, e.sender) for e in sim.sched.queue] == \
        [(6.2, Content.BYE, client(0))]
    assert sim.records[client(0)].incall_at == 2.0


def test_full_buffer_reject_branch():
    p = DefenseParams(k=1)
    sim = Simulation(quiet_config(defense=p))
    sim.load_buffer([BufferEntry(client(0), CallPhase.IN, 0.0)])
    sim.server.factor = 1e12  # admission probability ~ 0
    _add_actor(sim, client(1), ClientStatus.INVITE)
    sim.on_server_invite(client(1))
    assert sim.server.buffer.snapshot() == [(client(0), CallPhase.IN, 0.0)]
    assert sim.server.factor == 1e12 + 1
    (evt,) = sim.sched.queue
    assert evt.content is Content.UNAVAILABLE and evt.due == pytest.approx(0.1)


def test_no_defense_rejects_when_full():
    sim = Simulation(quiet_config(defense=DefenseParams(k=1, strategy=Strategy.NONE)))
    for i in (0, 1):
        _add_actor(sim, client(i), ClientStatus.INVITE)
    sim.on_server_invite(client(0))
    sim.on_server_invite(client(1))
    assert [e.actor for e in sim.server.buffer] == [client(0)]
    contents = {(e.target, e.content) for e in sim.sched.queue}
    assert (client(0), Content.RINGING) in contents
    assert (client(1), Content.UNAVAILABLE) in contents


def test_bye_after_drop_is_ignored():
    sim = Simulation(quiet_config())
    _add_actor(sim, client(0), ClientStatus.CONNECTED, incall_at=0.0)
    sim.sched.now = 1.0
    sim.on_drop_notice(client(0))
    sim.on_server_bye(client(0))
    assert sim.records[client(0)].outcome is Outcome.INCOMPLETE


def test_zero_rate_creates_no_calls():
    trace = run_scenario(ScenarioConfig(rate=0.0))
    assert trace.records == []
    assert all(a == 0 for _, a, _ in trace.occupancy_samples)


def test_same_seed_same_trace():
    cfg = desk_scenario(attacker_share=0.5, strategy="roulette", seed=31)
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.records == b.records and a.occupancy_samples == b.occupancy_samples
    c = run_scenario(dataclasses.replace(cfg, seed=32))
    assert c.records != a.records


@pytest.mark.parametrize("seed", range(5))
def test_no_defense_never_interrupts(seed):
    trace = run_scenario(desk_scenario(attacker_share=0.83, strategy="none", seed=seed))
    assert not any(r.outcome is Outcome.INCOMPLETE for r in trace.records)


@pytest.mark.parametrize("strategy", list(Strategy))
def test_buffer_bound_and_counts(strategy):
    cfg = desk_scenario(attacker_share=0.67, strategy=strategy, seed=3)
    trace = run_scenario(cfg)
    assert all(0 <= a <= n <= cfg.defense.k for _, a, n in trace.occupancy_samples)
    assert not any(r.outcome is Outcome.PENDING for r in trace.records)
    assert all(r.intended_duration is None for r in trace.records if not r.honest)


def test_step_stops_at_horizon():
    cfg = desk_scenario(attacker_share=0.3, seed=2, total=10.0)
    sim = Simulation(cfg)
    sim.start()
    last = 0.0
    while (evt := sim.step()) is not None:
        last = evt.due
    assert last <= 10.0
    assert sim.sched.peek().due > 10.0


def test_retries_give_rejected_calls_another_chance():
    cfg = desk_scenario(attacker_share=0.83, strategy="none", seed=1)
    base = run_scenario(cfg)
    retry = run_scenario(dataclasses.replace(cfg, retry_rejected=True, max_retries=3))
    assert all(r.retries == 0 for r in base.records)
    assert max(r.retries for r in retry.records) == 3
    assert all(r.retries <= 3 for r in retry.records)


def test_rejects_non_config():
    with pytest.raises(ConfigError):
        Simulation({"rate": 1.0})


def test_trace_metadata():
    trace = run_scenario(desk_scenario(seed=5))
    assert trace.metadata["seed"] == 5
    assert trace.metadata["mode"] == "seven"
    assert trace.metadata["config"]["defense"]["strategy"] == "tournament"
    assert ActorKind.CLIENT in {r.actor.kind for r in trace.records}
