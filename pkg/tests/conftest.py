import numpy as np
import pytest

from emogen import RigGenParams, generate_synthetic_rig
from emogen.evolution import GAConfig


@pytest.fixture(scope="session")
def rig():
    return generate_synthetic_rig(RigGenParams())


@pytest.fixture()
def cfg():
    return GAConfig()


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
