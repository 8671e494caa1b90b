import numpy as np
import pytest

from dnls_arnold import lattice as lat


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def P3():
    return lat.LatticeParams(3)
