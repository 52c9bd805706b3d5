import numpy as np
import pytest
from hypothesis import settings

from entry_contest.priors_costs import make_cost, make_prior

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def uniform():
    return make_prior("uniform")


@pytest.fixture
def linear():
    return make_cost("linear")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
