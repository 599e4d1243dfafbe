import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from shiftnorm.geometry import ConvexDomain

settings.register_profile(
    "default", max_examples=40, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def unit_interval():
    return ConvexDomain.box([0.0], [1.0])


@pytest.fixture
def unit_square():
    return ConvexDomain.box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def unit_disk():
    return ConvexDomain.ball([0.0, 0.0], 1.0)


@pytest.fixture
def triangle():
    return ConvexDomain.from_halfspaces([[-1, 0], [0, -1], [1, 1]], [0, 0, 1])


@pytest.fixture
def unit_cube():
    return ConvexDomain.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
