import numpy as np
import pytest

from gekf_esc import field as fld
from gekf_esc.config import parse_config

QUAD = {"kind": "quadratic", "peak": 10.0, "center": [1.0, 1.0], "weights": [0.5, 1.5]}


@pytest.fixture
def quad():
    return fld.build_field(QUAD)


@pytest.fixture(scope="session")
def presets():
    return parse_config()


@pytest.fixture(scope="session")
def sim_run(presets):
    """The known-objective GEKF run, shared by several tests (about half a second)."""
    from gekf_esc.sim import run_scenario
    sc = presets.get("sim_known_objective")
    return sc, run_scenario(sc)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
