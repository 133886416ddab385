import numpy as np
import pytest

from genunit.plant import nominal_params, nominal_stress_params


@pytest.fixture(scope="session")
def params():
    return nominal_params()


@pytest.fixture(scope="session")
def stress_params():
    return nominal_stress_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
