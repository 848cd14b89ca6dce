import numpy as np
import pytest

from nematic_gamma.potentials import MaterialParams


@pytest.fixture
def mat():
    return MaterialParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
