import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ebtk", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ebtk")


def random_hermitian(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_state(d, rng, rank=None):
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    r = g @ g.conj().T
    return r / np.trace(r).real


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]])
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
PHI_PLUS = np.array([1, 0, 0, 1]) / np.sqrt(2)
