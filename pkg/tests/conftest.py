import numpy as np
import pytest


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make
