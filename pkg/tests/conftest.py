import socket

import pytest

from hag.persona import PersonaRecord, Population, Provenance, default_schema


class NetworkUsed(AssertionError):
    pass


def _forbid(*args, **kwargs):
    raise NetworkUsed(f"network access attempted: {args!r}")


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Every test runs offline: any socket connect or DNS lookup fails loudly."""
    monkeypatch.setenv("HAG_OFFLINE", "1")
    monkeypatch.setattr(socket.socket, "connect", _forbid)
    monkeypatch.setattr(socket.socket, "connect_ex", _forbid)
    monkeypatch.setattr(socket, "getaddrinfo", _forbid)
    monkeypatch.setattr(socket, "create_connection", _forbid)


@pytest.fixture(scope="session")
def schema():
    return default_schema()


BASE = {
    "country": "Germany",
    "language": "German",
    "gender": "Female",
    "age": "25-34",
    "marital_status": "Single",
    "education": "Master",
    "occupation": "Professional and technical",
    "income_level": "Medium",
    "financial_status": "Saved money",
    "social_class": "Upper middle class",
    "religion": "No religion",
    "ethnicity": "White",
}


def record(i=0, provenance=Provenance.REAL, **changes):
    values = {**BASE, **changes}
    sid = f"r{i:04d}" if provenance is Provenance.REAL else None
    return PersonaRecord(values, provenance, source_id=sid)


def population(rows, topic="t"):
    return Population(topic, tuple(record(i, **r) for i, r in enumerate(rows)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
