import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dyson_lab.spectral import Domain

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def torus256():
    return Domain.torus(256)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


def band_limited(rng, n, band):
    """Random zero-mean real trigonometric polynomial with modes 1..band."""
    c = np.zeros(n // 2 + 1, dtype=complex)
    c[1 : band + 1] = rng.standard_normal(band) + 1j * rng.standard_normal(band)
    return np.fft.irfft(c, n=n) * (n / band)


def positive_density(rng, domain, band=6, amplitude=0.5):
    """Band-limited positive density with unit mass."""
    n = domain.n_points
    c = np.zeros(n // 2 + 1, dtype=complex)
    k = np.arange(1, band + 1)
    c[1 : band + 1] = (rng.standard_normal(band) + 1j * rng.standard_normal(band)) / k**2
    pert = np.fft.irfft(c, n=n)
    pert *= amplitude / max(np.max(np.abs(pert)), 1e-300)
    u = (1.0 + pert) / domain.circumference
    return u / (u.sum() * domain.dx)


TWO_PI = 2.0 * math.pi
