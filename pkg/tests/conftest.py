import numpy as np
import pytest

from starwpt.config import builtin_profile


@pytest.fixture(scope="session")
def desk():
    return builtin_profile("desk")


@pytest.fixture()
def rng():
    return np.random.default_rng(7)


def random_hermitian(n, rng):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2.0
