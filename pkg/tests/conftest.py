import numpy as np
import pytest

from clustersim.schemas import MonteCarloConfig, QDParams


@pytest.fixture
def params():
    return QDParams()


@pytest.fixture
def clean_params():
    """Default dot without Overhauser disorder"""
    return QDParams(sigma_o_mT=0.0)


@pytest.fixture
def ideal_params():
    """No field, no disorder, full pi rotation"""
    return QDParams(field_mT=0.0, sigma_o_mT=0.0, theta=0.0, normalized_pulse=True)


@pytest.fixture
def small_mc():
    return MonteCarloConfig(n_samples=8, master_seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density_matrix(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_complex(rng, rows, cols):
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
