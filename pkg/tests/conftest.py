import pytest

from tdoslab import DefenseParams, ScenarioConfig
from tdoslab.domain import ActorId, ActorKind


def client(i):
    return ActorId(ActorKind.CLIENT, i)


def attacker(i):
    return ActorId(ActorKind.ATTACKER, i)


@pytest.fixture
def params():
    return DefenseParams()


def quiet_config(**kw):
    """No generators: tests inject actors and events by hand."""
    kw.setdefault("rate", 0.0)
    return ScenarioConfig(**kw)


_CRITERIA: list[tuple[int, bool, str]] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    _CRITERIA.append((number, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
