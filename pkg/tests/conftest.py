import math

import numpy as np
import pytest

from chandisc.protocols import example12

LOG43_HALF = math.log2(4 / 3) / 2
LOG43_QUARTER = math.log2(4 / 3) / 4


@pytest.fixture(scope="session")
def ex12():
    return example12()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
