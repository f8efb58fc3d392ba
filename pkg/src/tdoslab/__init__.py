"""Discrete-event simulation of the Coordinated Call TDoS attack and the SeVen defense."""

from .domain import (ActorId, ActorKind, ArrivalMode, BufferEntry, CallPhase, CallRecord,
                     ConfigError, DefenseParams, DurationKind, Event, Outcome, ScenarioConfig,
                     Scheduler, SchedulingError, ServerBuffer, Strategy)
from .engine import RunTrace, Simulation, run_scenario
from .experiment import (MCConfig, MCResult, ScenarioGrid, erlang_b, monte_carlo,
                         desk_scenario, run_grid, run_monte_carlo, size_rate)
from .metrics import MeasureSet, compute_measures
from .stochastic import DurationModel, RandomStream

__all__ = [
    "ActorId", "ActorKind", "ArrivalMode", "BufferEntry", "CallPhase", "CallRecord",
    "ConfigError", "DefenseParams", "DurationKind", "DurationModel", "Event", "MCConfig",
    "MCResult", "MeasureSet", "Outcome", "RandomStream", "RunTrace", "ScenarioConfig",
    "ScenarioGrid", "Scheduler", "SchedulingError", "ServerBuffer", "Simulation", "Strategy",
    "compute_measures", "erlang_b", "monte_carlo", "desk_scenario", "run_grid",
    "run_monte_carlo", "run_scenario", "size_rate",
]
__version__ = "0.1.0"
