"""Two-point kernels of the free scalar field in vacuum, thermal and LTE states.

Convention: the centred kernel of a state at the point ``q`` is

    w_q(xi) = omega_2(q - xi, q + xi),

so the point separation entering the Wightman function is ``2 xi``.  Its
continuation into the flat tube is evaluated at the complex point separation

    Z = 2 xi + i sigma e,      0 <= sigma < beta,

i.e. the real part is doubled and the imaginary part is not.  With this choice
``F(xi + i sigma e)`` tends to ``w_q(xi)`` as sigma -> 0 and to ``w_q(-xi)`` as
sigma -> beta for a thermal kernel with inverse temperature ``beta e``.

Every state exposes three vectorised methods used by the checkers:

``kernel(q, Z)``
    w at complex point separations Z (shape (..., 4)).
``subtracted(q, xi)``
    D(xi) = w_q(xi) - w_vac(xi) at real xi, computed without cancellation
    where a closed Bose/vacuum split exists.
``density(q, p)``
    on-shell spectral weight eps(p0) * n(p) of the Fourier transform of w_q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from . import _quadrature as quad
from .errors import (
    ImagScaleOutOfStrip,
    NotInForwardCone,
    OffShell,
    OnLightcone,
    PathUnavailable,
)
from .minkowski import (
    EPS_CONE,
    InverseTemperatureVector,
    as_beta,
    decompose_beta,
    four_vector,
    in_forward_cone,
    minkowski_dot,
)

EPS_SHELL = 1e-9
_DIRECTION_TOL = 1e-10


@dataclass(frozen=True)
class ComplexSeparation:
    """xi + i sigma e.  ``real_part`` may carry leading batch axes."""

    real_part: np.ndarray
    imag_scale: float | np.ndarray = 0.0
    imag_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def point_separation(self) -> np.ndarray:
        xi = np.asarray(self.real_part, dtype=float)
        sigma = np.asarray(self.imag_scale, dtype=float)[..., None]
        e = np.asarray(self.imag_direction, dtype=float)
        return 2.0 * xi + 1j * sigma * e


def separation(xi, sigma=0.0, e=(1.0, 0.0, 0.0, 0.0)) -> ComplexSeparation:
    return ComplexSeparation(np.asarray(xi, dtype=float), sigma, np.asarray(e, dtype=float))


def _imag_parts(Z):
    Z = np.asarray(Z, dtype=complex)
    return Z.imag


def _check_real_axis(Z):
    """Points with vanishing imaginary part must be spacelike."""
    Z = np.asarray(Z, dtype=complex)
    real_pts = ~np.any(Z.imag != 0.0, axis=-1)
    if np.any(real_pts):
        X = Z.real[real_pts]
        sq = minkowski_dot(X, X)
        if np.any(sq >= -EPS_CONE):
            raise OnLightcone("real-axis evaluation needs spacelike point separation 2*xi")


def _strip_coordinates(Z, beta: InverseTemperatureVector):
    """(z0, r) in the rest frame of beta; Im Z must be sigma * beta.direction."""
    Z = np.asarray(Z, dtype=complex)
    im = Z.imag
    sigma = minkowski_dot(im, beta.direction)
    resid = im - sigma[..., None] * beta.direction
    if np.any(np.abs(resid) > _DIRECTION_TOL * np.maximum(1.0, np.abs(sigma))[..., None]):
        raise PathUnavailable("imaginary direction must equal the rest direction of beta")
    if np.any(sigma < -_DIRECTION_TOL) or np.any(sigma >= beta.beta_scalar):
        raise ImagScaleOutOfStrip(f"imaginary scale outside [0, {beta.beta_scalar})")
    Zc = Z.real + 1j * np.maximum(sigma, 0.0)[..., None] * beta.direction
    return quad.rest_coordinates(Zc, beta.direction)


def _shell_check(p, mass: float):
    p = np.asarray(p, dtype=float)
    pp = minkowski_dot(p, p)
    if np.any(np.abs(pp - mass**2) > EPS_SHELL * max(1.0, mass**2)):
        raise OffShell(f"momentum not on the mass shell p.p = {mass**2}")
    return p


def _bose_density(beta_vec, p):
    """eps(p0) / (1 - exp(-beta.p)); finite for p0 != 0."""
    x = minkowski_dot(p, beta_vec)
    return np.sign(p[..., 0]) / (-np.expm1(-x))


# ---------------------------------------------------------------- thermal kernels


def thermal_part(beta, mass: float, Z, path: str = "auto"):
    """Bose (vacuum-subtracted) part of the thermal kernel at complex separations Z."""
    beta = as_beta(beta)
    z0, r = _strip_coordinates(Z, beta)
    if path == "auto":
        path = "images" if mass == 0.0 else "quadrature"
    if path == "images":
        if mass != 0.0:
            raise PathUnavailable("image sum is only available for the massless field")
        value, _ = quad.thermal_images(beta.beta_scalar, z0, r)
        return value
    if path == "quadrature":
        return quad.thermal_radial(beta.beta_scalar, mass, z0, r)
    raise ValueError(f"unknown path {path!r}")


def vacuum_point_kernel(mass: float, Z, path: str = "closed"):
    Z = np.asarray(Z, dtype=complex)
    _check_real_axis(Z)
    if path == "closed":
        return quad.vacuum_closed_form(mass, minkowski_dot(Z, Z))
    if path == "quadrature":
        im = Z.imag
        sigma = np.sqrt(np.maximum(minkowski_dot(im, im), 0.0))
        if np.any(sigma <= 0) or np.any(im[..., 0] <= 0):
            raise PathUnavailable("vacuum quadrature needs Im Z in the forward cone")
        e = im / sigma[..., None]
        # rest frame per point
        z0 = np.empty(sigma.shape, dtype=complex)
        r = np.empty(sigma.shape)
        flat_e = e.reshape(-1, 4)
        flat_Z = Z.reshape(-1, 4)
        for i, (zi, ei) in enumerate(zip(flat_Z, flat_e)):
            a, b = quad.rest_coordinates(zi, ei)
            z0.flat[i] = a
            r.flat[i] = b
        return quad.vacuum_radial(mass, z0, r)
    raise ValueError(f"unknown path {path!r}")


def _thermal_kernel(beta, mass, Z, path="auto"):
    Z = np.asarray(Z, dtype=complex)
    return vacuum_point_kernel(mass, Z) + thermal_part(beta, mass, Z, path)


def _hotbang_thermal(gamma: float, q, Z):
    """Bose part of the hot-bang kernel by adaptive Gauss-Kronrod (quad_vec).

    Written directly with the occupation 1/(1 - exp(-2 gamma q.p)) in the rest
    frame of q; it shares no code with the thermal kernels above.
    """
    q = np.asarray(q, dtype=float)
    if not in_forward_cone(q):
        raise NotInForwardCone("hot-bang kernel needs q in V+ (x + y = 2q)")
    qn = float(np.sqrt(minkowski_dot(q, q)))
    e = q / qn
    beta = 2.0 * gamma * qn
    Z = np.asarray(Z, dtype=complex)
    im = Z.imag
    sigma = minkowski_dot(im, e)
    if np.any(np.abs(im - sigma[..., None] * e) > _DIRECTION_TOL * np.maximum(1.0, np.abs(sigma))[..., None]):
        raise PathUnavailable("imaginary direction must be q/|q| for the hot-bang kernel")
    if np.any(sigma < -_DIRECTION_TOL) or np.any(sigma >= beta):
        raise ImagScaleOutOfStrip(f"imaginary scale outside [0, {beta})")
    X = Z.real
    t = minkowski_dot(X, e).ravel()
    r = np.sqrt(np.maximum(t**2 - minkowski_dot(X, X).ravel(), 0.0))
    s = np.maximum(sigma, 0.0).ravel()
    p_max = 40.0 / (beta - float(s.max(initial=0.0)))

    def integrand(p):
        # (n(p) - 1) e^{i p z0} - n(-p) e^{-i p z0}, n(p) = 1/(1 - e^{-beta p})
        # exponents combined so that e^{p s} never appears alone
        bose = 1.0 / (-np.expm1(-beta * p))
        up = np.exp(1j * p * t - p * (s + beta))
        down = np.exp(-1j * p * t - p * (beta - s))
        val = quad.sin_over_r(p, r) * bose * (up + down) / (4.0 * np.pi**2)
        return np.concatenate([val.real, val.imag])

    res, _ = integrate.quad_vec(integrand, 0.0, p_max, epsabs=1e-15, epsrel=1e-13, limit=20000)
    n = t.size
    return (res[:n] + 1j * res[n:]).reshape(sigma.shape)


# ---------------------------------------------------------------- state variants


class StateSpec:
    """Base class of the state variants.  Instances are immutable."""

    mass: float = 0.0

    def kernel(self, q, Z):
        raise NotImplementedError

    def subtracted(self, q, xi):
        xi = np.asarray(xi, dtype=float)
        Z = 2.0 * xi + 0j
        return (self.kernel(q, Z) - vacuum_point_kernel(self.mass, Z)).real

    def density(self, q, p):
        raise NotImplementedError

    def local_beta(self, q) -> InverseTemperatureVector | None:
        """Inverse temperature vector if the state is pointwise thermal at q, else None."""
        return None


@dataclass(frozen=True)
class Vacuum(StateSpec):
    mass: float = 0.0

    def kernel(self, q, Z):
        return vacuum_point_kernel(self.mass, Z)

    def subtracted(self, q, xi):
        return np.zeros(np.shape(xi)[:-1])

    def density(self, q, p):
        p = _shell_check(p, self.mass)
        return (p[..., 0] > 0).astype(float)


@dataclass(frozen=True)
class Kms(StateSpec):
    beta: InverseTemperatureVector
    mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", as_beta(self.beta))

    def kernel(self, q, Z, path="auto"):
        return _thermal_kernel(self.beta, self.mass, Z, path)

    def subtracted(self, q, xi, path="auto"):
        xi = np.asarray(xi, dtype=float)
        return thermal_part(self.beta, self.mass, 2.0 * xi + 0j, path).real

    def density(self, q, p):
        p = _shell_check(p, self.mass)
        return _bose_density(self.beta.vector, p)

    def local_beta(self, q):
        return self.beta


@dataclass(frozen=True)
class HotBang(StateSpec):
    gamma: float
    mass: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def kernel(self, q, Z):
        Z = np.asarray(Z, dtype=complex)
        return vacuum_point_kernel(0.0, Z) + _hotbang_thermal(self.gamma, q, Z)

    def subtracted(self, q, xi):
        xi = np.asarray(xi, dtype=float)
        return _hotbang_thermal(self.gamma, q, 2.0 * xi + 0j).real

    def density(self, q, p):
        q = np.asarray(q, dtype=float)
        if not in_forward_cone(q):
            raise NotInForwardCone("hot-bang density needs q in V+")
        p = _shell_check(p, 0.0)
        return _bose_density(2.0 * self.gamma * q, p)

    def local_beta(self, q):
        return decompose_beta(2.0 * self.gamma * np.asarray(q, dtype=float))


@dataclass(frozen=True)
class ThermalMeasure:
    atoms: tuple[tuple[InverseTemperatureVector, float], ...]

    def __post_init__(self):
        atoms = tuple((as_beta(b), float(w)) for b, w in self.atoms)
        if not atoms:
            raise ValueError("a thermal measure needs at least one atom")
        weights = np.array([w for _, w in atoms])
        if np.any(weights < 0):
            raise ValueError("measure weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"measure weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_lists(cls, betas: Sequence, weights: Sequence[float]) -> "ThermalMeasure":
        return cls(tuple(zip(betas, weights)))

    @property
    def betas(self) -> list[InverseTemperatureVector]:
        return [b for b, _ in self.atoms]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])


@dataclass(frozen=True)
class Mixed(StateSpec):
    measure: ThermalMeasure
    mass: float = 0.0

    def kernel(self, q, Z):
        Z = np.asarray(Z, dtype=complex)
        total = vacuum_point_kernel(self.mass, Z)
        for b, w in self.measure.atoms:
            total = total + w * thermal_part(b, self.mass, Z)
        return total

    def subtracted(self, q, xi):
        xi = np.asarray(xi, dtype=float)
        Z = 2.0 * xi + 0j
        return sum(w * thermal_part(b, self.mass, Z).real for b, w in self.measure.atoms)

    def density(self, q, p):
        p = _shell_check(p, self.mass)
        return sum(w * _bose_density(b.vector, p) for b, w in self.measure.atoms)


@dataclass(frozen=True)
class Translated(StateSpec):
    """omega(phi(x) phi(y)) = inner(phi(x - shift) phi(y - shift))."""

    inner: StateSpec
    shift: np.ndarray

    def __post_init__(self):
        s = four_vector(self.shift).copy()
        s.setflags(write=False)
        object.__setattr__(self, "shift", s)

    def __eq__(self, other):
        return (
            isinstance(other, Translated)
            and self.inner == other.inner
            and bool(np.array_equal(self.shift, other.shift))
        )

    def __hash__(self):
        return hash((self.inner, tuple(self.shift)))

    @property
    def mass(self):
        return self.inner.mass

    def _inner_q(self, q):
        return np.asarray(q, dtype=float) - self.shift

    def kernel(self, q, Z):
        return self.inner.kernel(self._inner_q(q), Z)

    def subtracted(self, q, xi):
        return self.inner.subtracted(self._inner_q(q), xi)

    def density(self, q, p):
        return self.inner.density(self._inner_q(q), p)

    def local_beta(self, q):
        return self.inner.local_beta(self._inner_q(q))


@dataclass(frozen=True)
class PointwiseThermal(StateSpec):
    """Candidate kernel q -> thermal kernel of mass m at beta(q) = 2 gamma q.

    For m = 0 this reproduces the hot-bang state; for m > 0 it is the ansatz
    that fails the Klein-Gordon equation.
    """

    gamma: float
    mass: float = 0.0

    def local_beta(self, q):
        return decompose_beta(2.0 * self.gamma * np.asarray(q, dtype=float))

    def kernel(self, q, Z):
        return _thermal_kernel(self.local_beta(q), self.mass, Z)

    def subtracted(self, q, xi):
        xi = np.asarray(xi, dtype=float)
        return thermal_part(self.local_beta(q), self.mass, 2.0 * xi + 0j).real

    def density(self, q, p):
        p = _shell_check(p, self.mass)
        return _bose_density(self.local_beta(q).vector, p)


# ---------------------------------------------------------------- public evaluators


def _point_sep(zeta) -> np.ndarray:
    if isinstance(zeta, ComplexSeparation):
        return zeta.point_separation()
    return 2.0 * np.asarray(zeta, dtype=float) + 0j


def vacuum_wightman(mass: float, q, zeta, path: str = "closed"):
    """Vacuum kernel w(xi + i sigma e); independent of q."""
    if mass < 0:
        raise ValueError("mass must be non-negative")
    return vacuum_point_kernel(mass, _point_sep(zeta), path)


def kms_wightman(beta, mass: float, q, zeta, path: str = "auto"):
    """Thermal kernel; ``path`` is 'images' (massless), 'quadrature' or 'auto'."""
    return Kms(as_beta(beta), mass).kernel(q, _point_sep(zeta), path)


def hotbang_wightman(gamma: float, q, zeta):
    return HotBang(gamma).kernel(q, _point_sep(zeta))


def mixed_wightman(measure: ThermalMeasure, mass: float, q, zeta):
    return Mixed(measure, mass).kernel(q, _point_sep(zeta))


def wightman(state: StateSpec, q, zeta):
    return state.kernel(q, _point_sep(zeta))


def two_point(state: StateSpec, x, y):
    """omega_2(x, y) at real points with x - y spacelike."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    q = 0.5 * (x + y)
    xi = 0.5 * (y - x)
    return state.kernel(q, 2.0 * xi + 0j)


def onshell_density(state: StateSpec, q, p):
    """eps(p0) * occupation of the state's Fourier kernel on the mass shell."""
    return state.density(q, p)


# ---------------------------------------------------------------- serialisation


def beta_to_list(beta: InverseTemperatureVector) -> list[float]:
    return [float(c) for c in beta.vector]


def state_to_dict(state: StateSpec) -> dict:
    if isinstance(state, Vacuum):
        return {"variant": "vacuum", "mass": state.mass}
    if isinstance(state, Kms):
        return {"variant": "kms", "beta": beta_to_list(state.beta), "mass": state.mass}
    if isinstance(state, HotBang):
        return {"variant": "hotbang", "gamma": state.gamma}
    if isinstance(state, Mixed):
        return {
            "variant": "mixed",
            "mass": state.mass,
            "atoms": [{"beta": beta_to_list(b), "weight": w} for b, w in state.measure.atoms],
        }
    if isinstance(state, Translated):
        return {
            "variant": "translated",
            "shift": [float(c) for c in state.shift],
            "inner": state_to_dict(state.inner),
        }
    if isinstance(state, PointwiseThermal):
        return {"variant": "pointwise_thermal", "gamma": state.gamma, "mass": state.mass}
    raise TypeError(f"cannot serialise {type(state).__name__}")


def _beta_field(value):
    if np.ndim(value) == 0:
        return as_beta(float(value))
    return as_beta(list(value))


def state_from_dict(data: dict) -> StateSpec:
    """Inverse of :func:`state_to_dict`.  A scalar ``beta`` means the rest frame."""
    kind = data.get("variant")
    if kind == "vacuum":
        return Vacuum(float(data.get("mass", 0.0)))
    if kind == "kms":
        return Kms(_beta_field(data["beta"]), float(data.get("mass", 0.0)))
    if kind == "hotbang":
        return HotBang(float(data["gamma"]))
    if kind == "mixed":
        atoms = tuple((_beta_field(a["beta"]), float(a["weight"])) for a in data["atoms"])
        return Mixed(ThermalMeasure(atoms), float(data.get("mass", 0.0)))
    if kind == "translated":
        return Translated(state_from_dict(data["inner"]), np.asarray(data["shift"], dtype=float))
    if kind == "pointwise_thermal":
        return PointwiseThermal(float(data["gamma"]), float(data.get("mass", 0.0)))
    raise ValueError(f"unknown state variant {kind!r}")


def iter_atoms(state: StateSpec) -> Iterable[tuple[InverseTemperatureVector, float]]:
    if isinstance(state, Mixed):
        return state.measure.atoms
    if isinstance(state, Kms):
        return ((state.beta, 1.0),)
    return ()
