import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fraclab.grid import GridSpec

settings.register_profile(
    "fraclab", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("fraclab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spec1():
    return GridSpec(1, 1.0, 64, 8)


@pytest.fixture
def spec2():
    return GridSpec(2, 1.0, 32, 4)
