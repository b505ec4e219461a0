import numpy as np
import pytest

from pfdyn import systems
from pfdyn.lorenzlab import LorenzParams


@pytest.fixture
def lorenz_F():
    return systems.lorenz()


@pytest.fixture
def classic():
    return LorenzParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
