import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from triplab.core import ItemSet
from triplab.oracle import NoisyOracle, sample_unit_cube
from triplab.sampling import sample_random

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cube20():
    """20 points in the unit cube, d=3, fixed seed."""
    return sample_unit_cube(20, 3, 42)


@pytest.fixture(scope="session")
def answers20(cube20):
    """600 noiseless answers on cube20."""
    oracle = NoisyOracle(cube20, 0.0, 7)
    return oracle.answer_set(sample_random(cube20.items, 600, 11))


@pytest.fixture(scope="session")
def noisy20(cube20):
    oracle = NoisyOracle(cube20, 0.2, 13)
    return oracle.answer_set(sample_random(cube20.items, 600, 17))


@pytest.fixture
def items5():
    return ItemSet(5)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
