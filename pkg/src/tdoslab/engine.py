"""Discrete-event executor for the Coordinated Call attack and the SeVen server.

Actors exchange timestamped messages through a single :class:`Scheduler`.
Two generators spawn honest clients and attackers; each caller actor stands
for a caller/callee pair. The server runs SeVen (buffer rounds, probabilistic
admission, victim selection) or a plain first-come capacity check.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .domain import (
    ATTACKER_GENERATOR,
    CLIENT_GENERATOR,
    SERVER,
    ActorId,
    ActorKind,
    BufferEntry,
    CallPhase,
    CallRecord,
    ConfigError,
    Content,
    DefenseParams,
    Event,
    Outcome,
    ScenarioConfig,
    Scheduler,
    ServerBuffer,
)
from .stochastic import (
    GENERATOR,
    DurationModel,
    RandomStream,
    sample_bernoulli,
    sample_duration,
    sample_interarrival,
)
from .strategy import Selector, admission_probability, selector_for


class ClientStatus(str, Enum):
    NONE = "none"
    INVITE = "invite"
    CONNECTED = "connected"
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    UNSUCCESSFUL = "unsuccessful"


@dataclass
class ClientState:
    id: ActorId
    honest: bool
    intended_duration: Optional[float] = None
    status: ClientStatus = ClientStatus.NONE
    retries: int = 0


@dataclass
class ServerState:
    buffer: ServerBuffer
    params: DefenseParams
    factor: float = 0.0

    @property
    def mode(self) -> str:
        return "seven" if self.params.defended else "no_defense"


@dataclass
class RunTrace:
    records: list[CallRecord]
    # (time, attacker_slots, total_slots), one per round boundary
    occupancy_samples: list[tuple[float, int, int]]
    k: int
    total: float
    metadata: dict = field(default_factory=dict)


def config_snapshot(cfg: ScenarioConfig) -> dict:
    def plain(v):
        if isinstance(v, Enum):
            return v.value
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        return v

    return plain(dataclasses.asdict(cfg))


class Simulation:
    """One replica of a scenario.

    ``selector`` overrides the victim-selection strategy; tests use it to
    force a particular victim.
    """

    def __init__(self, cfg: ScenarioConfig, selector: Selector | None = None):
        if not isinstance(cfg, ScenarioConfig):
            raise ConfigError("expected a ScenarioConfig")
        self.cfg = cfg
        p = cfg.defense
        root = RandomStream(cfg.seed)
        self._rs_arrivals = {
            ActorKind.CLIENT: root.derive("arrivals/client"),
            ActorKind.ATTACKER: root.derive("arrivals/attacker"),
        }
        self._rs_duration = root.derive("durations")
        self.rs_server = root.derive("server")
        self.duration_model = DurationModel(cfg.duration_model, p.t_M, cfg.sigma)

        self.sched = Scheduler()
        self.server = ServerState(ServerBuffer(p.k), p)
        self.clients: dict[ActorId, ClientState] = {}
        self.records: dict[ActorId, CallRecord] = {}
        self.occupancy: list[tuple[float, int, int]] = []
        self._spawned = {ActorKind.CLIENT: 0, ActorKind.ATTACKER: 0}
        self._rounds = 0
        self._waiting = 0
        # (attacker_slots, total_slots); None after any buffer change
        self._occ = None
        if selector is None and p.defended:
            selector = selector_for(p.strategy)
        self.selector = selector

    def load_buffer(self, entries) -> None:
        """Place entries in the server buffer, e.g. to start from a given state."""
        for e in entries:
            self.server.buffer.append(e)
            if e.phase is CallPhase.WAIT:
                self._waiting += 1
        self._occ = None

    # ------------------------------------------------------------------ run

    def start(self) -> None:
        """Queue the initial events: both generator spawns at 0, first round at Ts."""
        if self.cfg.attacker_rate > 0:
            self.sched.schedule(0.0, ATTACKER_GENERATOR, Content.SPAWN)
        if self.cfg.client_rate > 0:
            self.sched.schedule(0.0, CLIENT_GENERATOR, Content.SPAWN)
        self.sched.schedule(self.cfg.defense.Ts, SERVER, Content.ROUND)

    def step(self) -> Optional[Event]:
        """Deliver the next event due at or before the horizon."""
        head = self.sched.peek()
        if head is None or head.due > self.cfg.total:
            return None
        evt = self.sched.tick()
        self.dispatch(evt)
        return evt

    def run(self) -> RunTrace:
        self.start()
        while self.step() is not None:
            pass
        return self.finish()

    def finish(self) -> RunTrace:
        for rec in self.records.values():
            if rec.outcome is Outcome.PENDING:
                rec.outcome = Outcome.CENSORED
        return RunTrace(
            records=list(self.records.values()),
            occupancy_samples=self.occupancy,
            k=self.cfg.defense.k,
            total=self.cfg.total,
            metadata={
                "seed": self.cfg.seed,
                "generator": GENERATOR,
                "mode": self.server.mode,
                "config": config_snapshot(self.cfg),
            },
        )

    def dispatch(self, evt: Event) -> None:
        c = evt.content
        if evt.target == SERVER:
            if c is Content.INVITE:
                self.on_server_invite(evt.sender)
            elif c is Content.ROUND:
                self.on_server_round()
            elif c is Content.BYE:
                self.on_server_bye(evt.sender)
            return
        kind = evt.target.kind
        if kind is ActorKind.CLIENT_GENERATOR:
            self.on_generator_tick(ActorKind.CLIENT)
        elif kind is ActorKind.ATTACKER_GENERATOR:
            self.on_generator_tick(ActorKind.ATTACKER)
        elif c is Content.POLL:
            self.on_client_poll(evt.target)
        elif c is Content.RINGING:
            self.on_client_ringing(evt.target)
        elif c is Content.DROP_NOTICE:
            self.on_drop_notice(evt.target)
        elif c is Content.UNAVAILABLE:
            self.on_unavailable(evt.target)
        # TRYING needs no client-side action

    # ----------------------------------------------------------- generators

    def on_generator_tick(self, kind: ActorKind) -> ActorId | None:
        now = self.sched.now
        if now > self.cfg.total:
            return None
        honest = kind is ActorKind.CLIENT
        aid = ActorId(kind, self._spawned[kind])
        self._spawned[kind] += 1
        duration = sample_duration(self._rs_duration, self.duration_model) if honest else None
        self.clients[aid] = ClientState(aid, honest, duration)
        self.records[aid] = CallRecord(aid, honest, intended_duration=duration)
        self.sched.schedule(now, aid, Content.POLL)

        rate = self.cfg.client_rate if honest else self.cfg.attacker_rate
        gap = sample_interarrival(self._rs_arrivals[kind], rate, self.cfg.arrivals)
        gen = CLIENT_GENERATOR if honest else ATTACKER_GENERATOR
        self.sched.schedule(now + gap, gen, Content.SPAWN)
        return aid

    # -------------------------------------------------------------- callers

    def on_client_poll(self, aid: ActorId) -> None:
        c = self.clients[aid]
        if c.status is not ClientStatus.NONE:
            return
        now = self.sched.now
        c.status = ClientStatus.INVITE
        rec = self.records[aid]
        if rec.invited_at is None:
            rec.invited_at = now
        self.sched.schedule(now + self.cfg.delay, SERVER, Content.INVITE, aid)

    def on_client_ringing(self, aid: ActorId) -> None:
        c = self.clients[aid]
        if c.status is not ClientStatus.INVITE:
            return
        now = self.sched.now
        c.status = ClientStatus.CONNECTED
        self.records[aid].incall_at = now
        if c.honest:
            self.sched.schedule(now + c.intended_duration, SERVER, Content.BYE, aid)
        # attackers never hang up

    def _fail_or_retry(self, c: ClientState) -> None:
        if self.cfg.retry_rejected and c.retries < self.cfg.max_retries:
            c.retries += 1
            self.records[c.id].retries = c.retries
            c.status = ClientStatus.NONE
            self.sched.schedule(self.sched.now + self.cfg.delay, c.id, Content.POLL)
            return
        c.status = ClientStatus.UNSUCCESSFUL
        self.records[c.id].outcome = Outcome.UNSUCCESSFUL

    def on_unavailable(self, aid: ActorId) -> None:
        c = self.clients[aid]
        if c.status is ClientStatus.INVITE:
            self._fail_or_retry(c)

    def on_drop_notice(self, aid: ActorId) -> None:
        c = self.clients[aid]
        if c.status is ClientStatus.CONNECTED:
            c.status = ClientStatus.INCOMPLETE
            self.records[aid].mark_incomplete(self.sched.now)
        elif c.status is ClientStatus.INVITE:
            self._fail_or_retry(c)

    # --------------------------------------------------------------- server
    # Nothing below reads ClientState.honest: both kinds share one channel.

    def on_server_invite(self, sender: ActorId) -> None:
        srv = self.server
        buf = srv.buffer
        p = srv.params
        now = self.sched.now
        delay = self.cfg.delay

        if not buf.full:
            self._occ = None
            if p.defended:
                buf.append(BufferEntry(sender))
                self._waiting += 1
            else:
                # without SeVen the server answers at once
                buf.append(BufferEntry(sender, CallPhase.IN, now))
                self.sched.schedule(now, sender, Content.RINGING, SERVER)
            self.sched.schedule(now + delay, sender, Content.TRYING, SERVER)
            return

        if not p.defended:
            self.sched.schedule(now + delay, sender, Content.UNAVAILABLE, SERVER)
            return

        accept = sample_bernoulli(self.rs_server, admission_probability(p.k, srv.factor))
        srv.factor += 1.0
        if accept:
            idx = self.selector(buf.entries, now, p, self.rs_server)
            victim = buf.pop(idx)
            self._occ = None
            if victim.phase is CallPhase.WAIT:
                self._waiting -= 1
            self._waiting += 1
            # the newcomer takes the victim's slot
            buf.insert(idx, BufferEntry(sender))
            self.sched.schedule(now, victim.actor, Content.DROP_NOTICE, SERVER)
            self.sched.schedule(now, sender, Content.TRYING, SERVER)
        else:
            self.sched.schedule(now + delay, sender, Content.UNAVAILABLE, SERVER)

    def on_server_round(self) -> None:
        srv = self.server
        now = self.sched.now
        if srv.params.defended:
            if self._waiting:
                for e in srv.buffer.entries:
                    if e.phase is CallPhase.WAIT:
                        e.phase = CallPhase.IN
                        e.stamp = now
                        self.sched.schedule(now, e.actor, Content.RINGING, SERVER)
                self._waiting = 0
            srv.factor = 0.0
        self._sample_occupancy(now)
        self._rounds += 1
        # multiply rather than accumulate to keep round times drift-free
        self.sched.schedule((self._rounds + 1) * srv.params.Ts, SERVER, Content.ROUND)

    def on_server_bye(self, sender: ActorId) -> None:
        buf = self.server.buffer
        idx = buf.find(sender)
        if idx < 0:
            return
        if buf.pop(idx).phase is CallPhase.WAIT:
            self._waiting -= 1
        self._occ = None
        c = self.clients.get(sender)
        if c is not None and c.status is ClientStatus.CONNECTED:
            c.status = ClientStatus.COMPLETE
            self.records[sender].outcome = Outcome.COMPLETE

    def _sample_occupancy(self, now: float) -> None:
        if self._occ is None:
            entries = self.server.buffer.entries
            attackers = sum(1 for e in entries if e.actor.kind is ActorKind.ATTACKER)
            self._occ = (attackers, len(entries))
        self.occupancy.append((now, *self._occ))


def run_scenario(cfg: ScenarioConfig, selector: Selector | None = None) -> RunTrace:
    return Simulation(cfg, selector).run()
