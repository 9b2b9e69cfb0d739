import numpy as np
import pytest

from momentode.surrogates import build_copula_table


@pytest.fixture(scope="session")
def small_table():
    """Coarse copula table shared across tests (nodes include omega=1)."""
    return build_copula_table(n_omega=9, n_rho=21, quad_n=200, forward_n=41)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(20240817))
