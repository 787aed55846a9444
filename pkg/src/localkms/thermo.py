"""Thermal functions: values that KMS states assign to the balanced derivatives.

Massless field: S_alpha(beta) = c_n * d^alpha (beta.beta)^-1 with |alpha| = n,
derivatives taken with respect to the contravariant components of beta.  The
constants c_n are not given in closed form by the theory; they were obtained by
matching :func:`calibrate_constants` (balanced derivatives of the exact KMS
kernel at beta = (1, 0, 0, 0)) and agree with (-4)^k zeta(2k+2) / (2 pi^2),
n = 2k, to the calibration accuracy.

Massive field: only quadrature.  The derivative under the integral sign gives

    S_alpha(beta) = (-4)^k (2 pi)^-3 int d^3p / w  p_alpha / (e^{beta.p} - 1)

with p on the positive mass shell and lower-index components p_alpha.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

from . import _quadrature as quad
from .balanced import N_MAX, balanced_derivative, multi_indices, multi_indices_upto
from .errors import NotInForwardCone, OrderTooHigh
from .minkowski import ETA, InverseTemperatureVector, as_beta, lower, rest_frame_boost

C_N = {
    0: 1.0 / 12.0,
    2: -np.pi**2 / 45.0,
    4: 8.0 * np.pi**4 / 945.0,
}
C_N_PROVENANCE = (
    "c_n frozen from balanced-derivative calibration on the massless KMS kernel "
    "at beta=(1,0,0,0); equal to (-4)^k zeta(2k+2)/(2 pi^2)"
)

_B = sp.symbols("b0:4", real=True)
_INV_SQUARE = 1 / (_B[0] ** 2 - _B[1] ** 2 - _B[2] ** 2 - _B[3] ** 2)


def _as_forward_beta(beta) -> InverseTemperatureVector:
    try:
        return as_beta(beta)
    except NotInForwardCone:
        raise
    except ValueError as exc:
        raise NotInForwardCone(str(exc)) from exc


@lru_cache(maxsize=None)
def inverse_square_derivative(alpha: tuple):
    """Numerical function beta -> d^alpha (beta.beta)^-1 (exact rational derivative)."""
    expr = _INV_SQUARE
    for mu, k in enumerate(alpha):
        if k:
            expr = sp.diff(expr, _B[mu], k)
    return sp.lambdify([_B], sp.together(expr), "numpy")


def theta(beta, mass: float = 0.0, method: str = "auto") -> float:
    """Wick-square expectation omega_beta(:phi^2:) (the thermometer observable)."""
    beta = _as_forward_beta(beta)
    if mass < 0:
        raise ValueError("mass must be non-negative")
    if method == "auto":
        method = "closed" if mass == 0.0 else "quadrature"
    if method == "closed":
        if mass != 0.0:
            raise ValueError("closed form only for the massless field")
        return 1.0 / (12.0 * beta.beta_scalar**2)
    return _radial_moment(beta.beta_scalar, mass, 0, 0) / (2.0 * np.pi**2)


def stress_energy(beta) -> np.ndarray:
    """E_{mu nu}(beta) = (pi^2/90) (4 b_mu b_nu - b^2 eta_{mu nu}) (b^2)^-3, lower indices."""
    beta = _as_forward_beta(beta)
    b = lower(beta.vector)
    b2 = beta.beta_scalar**2
    return (np.pi**2 / 90.0) * (4.0 * np.outer(b, b) - b2 * ETA) / b2**3


def _radial_moment(beta_s: float, mass: float, j: int, k: int) -> float:
    """int_0^inf dp p^2 w^(j-1) p^k / (e^{beta w} - 1)."""
    p_max = 40.0 / beta_s + mass
    nodes, weights = quad._panels(p_max, min(0.5 / beta_s, max(mass, 0.5 / beta_s)))
    w = np.sqrt(nodes**2 + mass**2)
    bose = np.exp(-beta_s * w) / (-np.expm1(-beta_s * w))
    return float(np.sum(weights * nodes**2 * w ** (j - 1) * nodes**k * bose))


@lru_cache(maxsize=64)
def _sphere_rule(n_theta: int = 8, n_phi: int = 12):
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - x**2)
    dirs = np.stack(
        [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(x, n_phi)], axis=1
    )
    weights = np.repeat(wx, n_phi) * (2.0 * np.pi / n_phi)
    return dirs, weights


@lru_cache(maxsize=256)
def _massive_moments(beta_key: tuple, mass: float, order: int) -> dict:
    beta = as_beta(np.array(beta_key))
    bs = beta.beta_scalar
    L = rest_frame_boost(beta.direction)
    dirs, sw = _sphere_rule()
    p_max = 40.0 / bs + mass
    nodes, rw = quad._panels(p_max, min(0.5 / bs, max(mass, 0.5 / bs)))
    w = np.sqrt(nodes**2 + mass**2)
    bose = np.exp(-bs * w) / (-np.expm1(-bs * w))
    radial = rw * nodes**2 * bose / w  # d^3p / w with Bose weight
    p_rest = np.empty((nodes.size, dirs.shape[0], 4))
    p_rest[..., 0] = w[:, None]
    p_rest[..., 1:] = nodes[:, None, None] * dirs[None, :, :]
    p_lab = lower(p_rest @ L.T)
    weight = radial[:, None] * sw[None, :] / (2.0 * np.pi) ** 3
    k = order // 2
    out = {}
    for alpha in multi_indices(order):
        mono = np.prod(p_lab ** np.array(alpha), axis=-1)
        out[alpha] = float((-4.0) ** k * np.sum(weight * mono))
    return out


def thermal_function(beta, alpha, mass: float = 0.0, method: str = "auto") -> float:
    """S_alpha(beta) for the balanced derivative with multi-index alpha."""
    alpha = tuple(int(a) for a in alpha)
    n = sum(alpha)
    if n > N_MAX:
        raise OrderTooHigh(f"order {n} exceeds {N_MAX}")
    beta = _as_forward_beta(beta)
    if n % 2:
        return 0.0
    if method == "auto":
        method = "closed" if mass == 0.0 else "quadrature"
    if method == "closed":
        if mass != 0.0:
            raise ValueError("closed form only for the massless field")
        return float(C_N[n] * inverse_square_derivative(alpha)(beta.vector))
    return _massive_moments(tuple(float(c) for c in beta.vector), float(mass), n)[alpha]


def thermal_tensor(beta, order: int, mass: float = 0.0) -> dict:
    return {a: thermal_function(beta, a, mass) for a in multi_indices(order)}


def calibrate_constants(orders=(0, 2, 4), reference=(1.0, 0.0, 0.0, 0.0)) -> dict:
    """Fit c_n by matching balanced derivatives of the massless KMS kernel.

    Returns {n: (c_n, err_est)} using the pure time multi-index (n, 0, 0, 0).
    """
    from .states import Kms

    beta = as_beta(reference)
    state = Kms(beta, 0.0)
    out = {}
    for n in orders:
        alpha = (n, 0, 0, 0)
        value, err = balanced_derivative(state, np.zeros(4), alpha)
        base = float(inverse_square_derivative(alpha)(beta.vector))
        out[n] = (value / base, err / abs(base))
    return out


@dataclass
class ThermalFunctionTable:
    beta: InverseTemperatureVector
    mass: float
    entries: dict = field(default_factory=dict)  # alpha -> (value, method)

    @classmethod
    def build(cls, beta, order: int, mass: float = 0.0) -> "ThermalFunctionTable":
        beta = _as_forward_beta(beta)
        method = "closed-form" if mass == 0.0 else "quadrature"
        entries = {a: (thermal_function(beta, a, mass), method) for a in multi_indices_upto(order)}
        return cls(beta, mass, entries)

    def to_records(self) -> list[dict]:
        return [
            {"alpha": list(a), "value": v, "method": m}
            for a, (v, m) in self.entries.items()
        ]
