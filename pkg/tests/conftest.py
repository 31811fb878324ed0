import numpy as np
import pytest

from pspec.manifold import build_icosphere


@pytest.fixture(scope="session")
def ico2():
    return build_icosphere(2)


@pytest.fixture(scope="session")
def ico3():
    return build_icosphere(3)


@pytest.fixture(scope="session")
def ico4():
    return build_icosphere(4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
