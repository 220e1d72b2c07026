"""Shared fixtures. Expensive objects (expansions, NS sweeps) are built once per session."""
import numpy as np
import pytest

from pbflow import composite as cp
from pbflow import verify as vf
from pbflow.profile import BoundaryData
from pbflow.spectral import RadialGrid, ThetaGrid

R0 = 0.5
C_T = -1.0          # the sign of c_t that keeps the shear perturbation non-negative at r0 = 0.5
DEFAULT_EPS = [0.1, 0.07, 0.05, 0.035, 0.025]
RESIDUAL_EPS = [0.1, 0.05, 0.025]


@pytest.fixture(scope="session")
def grids():
    return ThetaGrid(32), RadialGrid(R0, 64)


@pytest.fixture(scope="session")
def bd_default():
    return BoundaryData.cosine(eta=0.05)


@pytest.fixture(scope="session")
def expansion(bd_default, grids):
    tg, rg = grids
    return cp.build_expansion(bd_default, C_T, 0.5, tg, rg)


@pytest.fixture(scope="session")
def problem(bd_default):
    return vf.Problem(bd_default, C_T, 0.5)


@pytest.fixture(scope="session")
def theorem_report(problem):
    return vf.theorem_sweep(problem, DEFAULT_EPS, keep_states=True)


@pytest.fixture(scope="session")
def family(bd_default):
    return vf.family_report([0.0, 0.25, 0.5, 0.75, 1.0], 0.05, bd_default.with_eta(0.02), C_T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
