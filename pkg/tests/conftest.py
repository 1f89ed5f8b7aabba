from __future__ import annotations

import pytest

from tracube.ingest import gen_synthetic
from tracube.oracle import OracleStore
from tracube.store import StoreConfig, build_store


@pytest.fixture(scope="session")
def small_tracks():
    return gen_synthetic(objects=30, instants=900, side=64, seed=7, gap_prob=0.01, gap_max=70)


@pytest.fixture(scope="session")
def small_oracle(small_tracks):
    return OracleStore(small_tracks)


@pytest.fixture(scope="session", params=[7, 50, 120])
def small_store(request, small_tracks):
    return build_store(small_tracks, StoreConfig(period=request.param))


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the final summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
