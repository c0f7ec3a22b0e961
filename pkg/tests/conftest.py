import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from espo_lab import make_random_cmdp

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile("default")


@pytest.fixture
def small_cmdp():
    return make_random_cmdp(7, 4, 3, 2, 0.4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
