import numpy as np
import pytest

from wspice.verify import random_sparse_instance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_instance(rng):
    """One seeded N=8, M=20 sparse instance shared by pointwise tests."""
    return random_sparse_instance(rng, 8, 20, k=2, snr_db=20.0)


def complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
