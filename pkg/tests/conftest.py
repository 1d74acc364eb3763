import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracwave.grid import Field, Grid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def g1():
    return Grid(1, 64, np.pi)


def mode(grid, k):
    return Field(grid, np.cos(k * grid.x[0] * np.pi / grid.L))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
