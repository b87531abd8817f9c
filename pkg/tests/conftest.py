import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pens.spectral import Grid

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture
def grid3():
    return Grid(3, 16, 2 * np.pi)


@pytest.fixture
def grid2():
    return Grid(2, 32, 2 * np.pi)


def random_real(grid, rng, components=None, band=True):
    """Random real field, optionally restricted to the dealiased band."""
    shape = grid.shape if components is None else (components,) + grid.shape
    f = rng.standard_normal(shape)
    if band:
        return grid.inverse(grid.forward(f) * grid.dealias_mask)
    return f


def random_divfree(grid, rng):
    return grid.leray(grid.forward(random_real(grid, rng, grid.n)))


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
