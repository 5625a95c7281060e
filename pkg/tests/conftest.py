import numpy as np
import pytest

from sbplab.energy import Params
from sbplab.grid import Grid
from sbplab.solve import minimize

ACCEPTANCE_LINES: list[str] = []

# natural-unit grid used by the solver scenarios
SOLVE_GRID = Grid(48, 16.0)
BASE_PARAMS = Params(1.0, 0.5, 2.5)


@pytest.fixture(scope="session")
def solve_grid():
    return SOLVE_GRID


@pytest.fixture(scope="session")
def base_result():
    return minimize(SOLVE_GRID, BASE_PARAMS)


@pytest.fixture(scope="session")
def gauss_grid():
    return Grid(64, 8.0)


@pytest.fixture(scope="session")
def unit_gaussian(gauss_grid):
    return np.pi ** -0.75 * np.exp(-0.5 * gauss_grid.r ** 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
