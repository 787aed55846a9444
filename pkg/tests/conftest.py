from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from localkms.states import Kms, StateSpec

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@dataclass(frozen=True)
class BumpedKms(StateSpec):
    """KMS plus amplitude * |xi|_E^4 * exp(-|xi|_E^2 / width^2).

    The bump is even and vanishes to fourth order at xi = 0, so balanced
    derivatives agree with the KMS ones through order 3 and differ at order 4.
    """

    base: Kms
    amplitude: float = 0.1
    width: float = 0.5

    @property
    def mass(self):
        return self.base.mass

    def _bump(self, xi):
        r2 = np.sum(xi * xi, axis=-1)
        return self.amplitude * r2**2 * np.exp(-r2 / self.width**2)

    def kernel(self, q, Z):
        Z = np.asarray(Z, dtype=complex)
        return self.base.kernel(q, Z) + self._bump(0.5 * Z)

    def subtracted(self, q, xi):
        xi = np.asarray(xi, dtype=float)
        return self.base.subtracted(q, xi) + self._bump(xi)

    def density(self, q, p):
        return self.base.density(q, p)

    def local_beta(self, q):
        return self.base.beta


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_points():
    return [np.array([1.0, 0, 0, 0]), np.array([2.0, 0.5, 0, 0]), np.array([3.0, -1.0, 1.0, 0])]
