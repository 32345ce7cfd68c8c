import numpy as np
import pytest

from bdeepnoise.activation import builtin

ACTIVATIONS = ("relu", "leaky_relu", "hard_tanh", "hard_sigmoid")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=ACTIVATIONS)
def activation(request):
    return builtin(request.param)
