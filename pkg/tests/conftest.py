import numpy as np
import pytest

from gradflow.grid import Field, GridSpec
from gradflow.model import Flow, ModelParams


@pytest.fixture
def grid8():
    return GridSpec(nx=8, ny=8)


@pytest.fixture
def grid4():
    return GridSpec(nx=4, ny=4)


@pytest.fixture
def grid40():
    return GridSpec(nx=40, ny=40)


@pytest.fixture
def params_ac():
    return ModelParams(m=0.6, epsilon=0.4, flow=Flow.ALLEN_CAHN)


@pytest.fixture
def params_ch():
    return ModelParams(m=0.6, epsilon=0.4, flow=Flow.CAHN_HILLIARD)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_field8(grid8, rng):
    return Field(grid8, rng.uniform(-1.0, 1.0, grid8.num_nodes))
