import numpy as np
import pytest
from hypothesis import settings

from viscolab.spectral import Grid

settings.register_profile("viscolab", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("viscolab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid64():
    return Grid(2, 64, 2 * np.pi * 16)


@pytest.fixture(scope="session")
def grid():
    return Grid()
