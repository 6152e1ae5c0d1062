import numpy as np
import pytest

from rmhmc.models import (
    BananaModel,
    FunnelModel,
    GaussianModel,
    LogisticModel,
    generate_banana_data,
    generate_logistic_data,
)

PAPER_MEAN = np.array([0.5, -1.0])
PAPER_COV = np.array([[1.0, 0.5], [0.5, 2.0]])


@pytest.fixture
def gaussian_model():
    return GaussianModel(PAPER_MEAN, PAPER_COV)


@pytest.fixture
def banana_model():
    return BananaModel(generate_banana_data(0, 100), sigma_y=2.0, sigma_theta=2.0)


@pytest.fixture
def funnel_model():
    return FunnelModel()


@pytest.fixture
def logistic_model():
    design, labels = generate_logistic_data(0, 100, 4, [0.5, -0.5, 1.0, 0.0])
    return LogisticModel(design, labels)
