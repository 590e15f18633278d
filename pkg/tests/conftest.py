import copy

import numpy as np
import pytest

from tlsbath.geometry import get_preset

SMALL_RUN = {
    "schema_version": 1,
    "name": "unit",
    "geometry": "gap5-long",
    "bath": {"sigma": 0.5, "tf_count": 4},
    "grids": {"n_scans": 12},
    "seeds": {"bath": 11, "dynamics": 12, "shot_noise": 13},
}


@pytest.fixture
def run_doc():
    """A small, fast run configuration as a JSON-ready mapping."""
    return copy.deepcopy(SMALL_RUN)


@pytest.fixture
def gap5():
    return get_preset("gap5-long")


@pytest.fixture
def gap100_short():
    return get_preset("gap100-short")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_lines():
    """Criterion number -> PASS/FAIL summary line, printed at the end of the session."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])
