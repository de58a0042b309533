import numpy as np
import pytest

from cnslab.spectral import make_grid


@pytest.fixture(scope="session")
def grid16():
    return make_grid(16, 2.0 * np.pi, 3)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32, 2.0 * np.pi, 3)


@pytest.fixture(scope="session")
def grid16_2d():
    return make_grid(16, 2.0 * np.pi, 2)
