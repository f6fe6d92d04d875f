import numpy as np
import pytest

from cutoffcontracts.agent import AgentSettings, PowerCost
from cutoffcontracts.densities import (
    GaussianDensity,
    LaplaceDensity,
    LogisticDensity,
    TriangularDensity,
    TruncatedExpInverseDensity,
    UniformDensity,
)
from cutoffcontracts.solver import SolverSettings


@pytest.fixture(scope="session")
def gaussian():
    return GaussianDensity()


@pytest.fixture(scope="session")
def laplace():
    return LaplaceDensity()


@pytest.fixture(scope="session")
def logistic():
    return LogisticDensity()


@pytest.fixture(scope="session")
def uniform():
    return UniformDensity()


@pytest.fixture(scope="session")
def triangular():
    return TriangularDensity()


@pytest.fixture(scope="session")
def trunc():
    return TruncatedExpInverseDensity(0.1)


@pytest.fixture(scope="session")
def quad_cost():
    """The workhorse cost lambda^2 / 8."""
    return PowerCost(0.125, 2.0)


@pytest.fixture(scope="session")
def agent_settings():
    return AgentSettings()


@pytest.fixture(scope="session")
def solver_settings():
    return SolverSettings()


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(20240817))
