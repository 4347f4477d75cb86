import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("crystcm", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("crystcm")

EQUIANHARMONIC = complex(np.exp(2j * np.pi / 3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
