import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from channels.presets import preset  # noqa: E402
from utils.config import Settings, reset_settings, set_settings  # noqa: E402


@pytest.fixture(autouse=True)
def default_settings():
    """Every test starts from default settings, independent of the environment."""
    set_settings(Settings())
    yield
    reset_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def pauli():
    return preset('pauli')


@pytest.fixture
def clock_shift_3():
    return preset('clock_shift:3')


@pytest.fixture
def sqrt_pauli():
    return preset('sqrt_pauli')
