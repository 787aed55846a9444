"""Four-vectors on Minkowski space with signature (+,-,-,-).

Four-vectors are plain ``numpy`` arrays whose last axis has length 4, in
natural units (hbar = c = k_B = 1).  Complex arrays are accepted by
:func:`minkowski_dot`, which is the bilinear (not sesquilinear) form.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NotInForwardCone

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
EPS_CONE = 1e-12


class Cone(str, Enum):
    FORWARD_TIMELIKE = "forward-timelike"
    BACKWARD_TIMELIKE = "backward-timelike"
    LIGHTLIKE = "lightlike"
    SPACELIKE = "spacelike"
    ZERO = "zero"


def four_vector(components, dtype=float) -> np.ndarray:
    v = np.asarray(components, dtype=dtype)
    if v.shape[-1:] != (4,):
        raise ValueError(f"expected trailing dimension 4, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("four-vector components must be finite")
    return v


def minkowski_dot(a, b):
    """Return a0*b0 - a1*b1 - a2*b2 - a3*b3 (broadcast over leading axes)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2] - a[..., 3] * b[..., 3]


def lower(v) -> np.ndarray:
    """Lower the index of a (batch of) four-vector(s)."""
    return np.asarray(v) * np.array([1.0, -1.0, -1.0, -1.0])


def classify_cone(v, eps: float = EPS_CONE) -> Cone:
    v = four_vector(v)
    if not np.any(v):
        return Cone.ZERO
    sq = minkowski_dot(v, v)
    if abs(sq) <= eps:
        return Cone.LIGHTLIKE
    if sq < 0:
        return Cone.SPACELIKE
    return Cone.FORWARD_TIMELIKE if v[0] > 0 else Cone.BACKWARD_TIMELIKE


def in_forward_cone(v) -> bool:
    v = np.asarray(v, dtype=float)
    return bool(v[0] > 0 and minkowski_dot(v, v) > 0)


def is_spacelike(v, eps: float = EPS_CONE):
    return minkowski_dot(v, v) < -eps


@dataclass(frozen=True)
class InverseTemperatureVector:
    """beta = beta_scalar * direction with direction a unit vector in V+."""

    vector: np.ndarray
    beta_scalar: float
    direction: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, InverseTemperatureVector):
            return NotImplemented
        return bool(np.array_equal(self.vector, other.vector))

    def __hash__(self):
        return hash(tuple(self.vector))

    def __repr__(self):
        comps = ", ".join(f"{c:.10g}" for c in self.vector)
        return f"InverseTemperatureVector(({comps}))"


def decompose_beta(v) -> InverseTemperatureVector:
    v = four_vector(v)
    if not in_forward_cone(v):
        raise NotInForwardCone(f"{tuple(v)} is not in the open forward light cone")
    beta = float(np.sqrt(minkowski_dot(v, v)))
    direction = v / beta
    v = v.copy()
    v.setflags(write=False)
    direction.setflags(write=False)
    return InverseTemperatureVector(vector=v, beta_scalar=beta, direction=direction)


def as_beta(beta) -> InverseTemperatureVector:
    """Accept an InverseTemperatureVector, a four-vector, or a positive scalar (rest frame)."""
    if isinstance(beta, InverseTemperatureVector):
        return beta
    if np.ndim(beta) == 0:
        return decompose_beta([float(beta), 0.0, 0.0, 0.0])
    return decompose_beta(beta)


def boost(rapidity: float, axis: int = 1) -> np.ndarray:
    """Boost matrix Lambda^mu_nu along a spatial axis (1, 2 or 3).

    Used by covariance tests; acts on contravariant components as ``L @ v``.
    """
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    L = np.eye(4)
    L[0, 0] = L[axis, axis] = ch
    L[0, axis] = L[axis, 0] = sh
    return L


def rest_frame_boost(e) -> np.ndarray:
    """Pure boost Lambda with Lambda @ (1,0,0,0) = e, for a unit timelike e."""
    e = np.asarray(e, dtype=float)
    g = e[0]
    u = e[1:]
    L = np.empty((4, 4))
    L[0, 0] = g
    L[0, 1:] = u
    L[1:, 0] = u
    L[1:, 1:] = np.eye(3) + np.outer(u, u) / (1.0 + g)
    return L
