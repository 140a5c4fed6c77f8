import numpy as np
import pytest

from serolatent.latent import ConditionalGaussian


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def it_cond():
    """Shared conditional Gaussian of the HT/IT/LT scenarios."""
    return ConditionalGaussian(-3.0, 1.0, 0.8, 0.3)


@pytest.fixture
def bm_cond():
    return ConditionalGaussian(-3.5, 1.5, 0.7, 0.2)
