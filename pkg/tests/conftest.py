import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tacter.config import bundled_params

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def params():
    return bundled_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
