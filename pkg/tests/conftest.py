import numpy as np
import pytest

from hlmc import gaussian_model, logistic_model, oscillation_model


@pytest.fixture(scope="session")
def osc():
    return oscillation_model()


@pytest.fixture(scope="session")
def logi():
    return logistic_model()


@pytest.fixture(scope="session")
def gauss():
    return gaussian_model(np.array([1.0, 10.0]))
