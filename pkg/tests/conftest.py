import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from xhacking.tabular import SimulationSpec, draw_explain_sample, simulate_collinear, split

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_split():
    data = simulate_collinear(SimulationSpec(n_rows=200, sigma1=0.1, sigma2=0.1, seed=7))
    return split(data, 0.2, 7)


@pytest.fixture(scope="session")
def small_sample(small_split):
    return draw_explain_sample(small_split, 20, 25, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
