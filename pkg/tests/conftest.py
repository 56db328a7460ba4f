"""Shared fixtures.

The N=300 and N=512 solves are expensive, so they are session-scoped and
shared by the unit and acceptance suites.  Everything here is seeded.
"""
import numpy as np
import pytest

from ion2d.crystal import TrapParams, solve_equilibrium
from ion2d.phonons import counterprop_delta_k, transverse_modes
from ion2d.units import YB171

LAMBDA_RAMAN = 411e-9


@pytest.fixture(scope="session")
def trap300():
    return TrapParams.from_frequencies_hz(0.69e6, 2.140e6, 0.167e6)


@pytest.fixture(scope="session")
def trap512():
    return TrapParams.from_frequencies_hz(0.60e6, 2.5e6, 0.15e6)


@pytest.fixture(scope="session")
def crystal300(trap300):
    return solve_equilibrium(trap300, YB171, 300, seed=1)


@pytest.fixture(scope="session")
def modes300(crystal300, trap300):
    return transverse_modes(crystal300, trap300, counterprop_delta_k(LAMBDA_RAMAN))


@pytest.fixture(scope="session")
def crystal64(trap300):
    return solve_equilibrium(trap300, YB171, 64, seed=3)


@pytest.fixture(scope="session")
def crystal20(trap300):
    return solve_equilibrium(trap300, YB171, 20, seed=2)


@pytest.fixture(scope="session")
def modes20(crystal20, trap300):
    return transverse_modes(crystal20, trap300, counterprop_delta_k(LAMBDA_RAMAN))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
