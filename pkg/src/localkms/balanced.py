"""Balanced derivatives of the Wick square from a state kernel.

The order-n balanced derivative at q is the n-th xi-derivative at xi = 0 of the
vacuum-subtracted kernel D(xi) = w_q(xi) - w_vac(xi).  Real-axis kernels are
only defined at spacelike separations, so derivatives are taken along tilted
spacelike rays t -> t*d with d = (a, n), |n| = 1, |a| <= 0.9.  Each ray gives a
directional derivative

    g(d) = sum_alpha n!/alpha! * T_alpha * d^alpha

by central differences on a Richardson ladder h0, h0/2, h0/4, h0/8; the symmetric
tensor T is recovered from an overdetermined set of rays by least squares.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonConvergent, OrderTooHigh, StencilNotSpacelike
from .minkowski import minkowski_dot
from .states import Mixed, StateSpec

N_MAX = 4
# first step as a fraction of the thermal length scale (see length_scale)
H0_FRACTION = 0.03
RUNGS = 4
MAX_TILT = 0.9
# relative precision assumed for a single kernel evaluation
EVAL_RELATIVE_PRECISION = 1e-14

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def multi_indices(order: int) -> list[tuple[int, int, int, int]]:
    """All alpha in N_0^4 with |alpha| = order, in lexicographically decreasing order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(4), order):
        alpha = [0, 0, 0, 0]
        for mu in combo:
            alpha[mu] += 1
        out.append(tuple(alpha))
    return out


def multi_indices_upto(order: int) -> list[tuple[int, int, int, int]]:
    return [a for n in range(order + 1) for a in multi_indices(n)]


def multinomial(alpha) -> int:
    n = sum(alpha)
    out = math.factorial(n)
    for a in alpha:
        out //= math.factorial(a)
    return out


def alpha_of(indices) -> tuple[int, int, int, int]:
    alpha = [0, 0, 0, 0]
    for mu in indices:
        alpha[mu] += 1
    return tuple(alpha)


def to_full_tensor(order: int, components: dict) -> np.ndarray:
    """Expand {alpha: value} into the symmetric 4^order array."""
    full = np.empty((4,) * order)
    for idx in itertools.product(range(4), repeat=order):
        full[idx] = components[alpha_of(idx)]
    return full


@dataclass(frozen=True)
class BalancedTensor:
    order: int
    components: dict  # alpha -> value
    errors: dict  # alpha -> estimated error

    @property
    def values(self) -> np.ndarray:
        return to_full_tensor(self.order, self.components)

    @property
    def estimated_error(self) -> np.ndarray:
        return to_full_tensor(self.order, self.errors)

    def __getitem__(self, alpha):
        return self.components[tuple(alpha)]


def ray_directions(order: int, count: int | None = None) -> np.ndarray:
    """Deterministic spacelike directions (a, n) with |n| = 1 and |a| <= MAX_TILT."""
    m = len(multi_indices(order))
    count = count or max(2 * m, 8)
    k = np.arange(count)
    z = 1.0 - (2.0 * k + 1.0) / count
    rho = np.sqrt(1.0 - z**2)
    phi = 2.0 * np.pi * _GOLDEN * k
    tilt = MAX_TILT * (2.0 * ((k * _GOLDEN * 7.0) % 1.0) - 1.0)
    return np.stack([tilt, rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def fd_weights(order: int, offsets) -> np.ndarray:
    """Weights w_j with sum_j w_j f(j h) = h^order f^(order)(0) + O(h^{len-order})."""
    offsets = np.asarray(offsets, dtype=float)
    V = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def _stencil(order: int):
    half = order // 2 + 1
    offsets = np.arange(-half, half + 1)
    return offsets, fd_weights(order, offsets)


def richardson(values, ratio: float = 2.0, first_power: int = 2, step: int = 2):
    """Richardson tableau along axis 0; returns (best, previous-best)."""
    rows = [np.asarray(v, dtype=float) for v in values]
    prev_best = rows[-1]
    power = first_power
    while len(rows) > 1:
        f = ratio**power
        new = [(f * rows[i + 1] - rows[i]) / (f - 1.0) for i in range(len(rows) - 1)]
        prev_best = rows[-1]
        rows = new
        power += step
    return rows[0], prev_best


def length_scale(state: StateSpec, q) -> float:
    """Distance from xi = 0 to the nearest complex singularity of D, up to O(1).

    For a thermal kernel with beta = beta_s * e the images sit at imaginary
    time beta_s in the rest frame; a boost shortens this by the Doppler factor
    e0 + |e_spatial| along lab-frame rays.
    """
    q = np.asarray(q, dtype=float)
    betas = []
    local = state.local_beta(q)
    if local is not None:
        betas.append(local)
    elif isinstance(state, Mixed):
        betas.extend(state.measure.betas)
    if not betas:
        return 1.0
    return min(b.beta_scalar / (b.direction[0] + np.linalg.norm(b.direction[1:])) for b in betas)


def default_h0(state: StateSpec, q) -> float:
    return H0_FRACTION * length_scale(state, q)


def directional_derivatives(state: StateSpec, q, order: int, directions, h0: float):
    """n-th derivatives of t -> D(t d) at t = 0 for each direction d.

    Returns (values, err_est, ladder) where ladder[k] holds the plain central
    differences at step h0 / 2**k.
    """
    directions = np.asarray(directions, dtype=float)
    if np.any(minkowski_dot(directions, directions) >= 0):
        raise StencilNotSpacelike("ray directions must be spacelike")
    offsets, weights = _stencil(order)
    steps = h0 / 2.0 ** np.arange(RUNGS)
    t = (steps[:, None] * offsets[None, :])  # (rungs, stencil)
    pts = t[:, :, None, None] * directions[None, None, :, :]  # (rungs, stencil, dirs, 4)
    vals = state.subtracted(q, pts.reshape(-1, 4)).reshape(RUNGS, len(offsets), len(directions))
    ladder = np.einsum("s,rsd->rd", weights, vals) / steps[:, None] ** order
    best, prev = richardson(ladder, first_power=2, step=2)
    scale = np.max(np.abs(vals), axis=(0, 1))
    roundoff = EVAL_RELATIVE_PRECISION * scale * np.sum(np.abs(weights)) / steps[-1] ** order
    diffs = np.abs(np.diff(ladder, axis=0))
    if order > 0:
        late, early = diffs[-1], diffs[0]
        bad = (late > early) & (late > 10.0 * roundoff)
        if np.any(bad):
            raise NonConvergent(f"Richardson ladder does not contract for order {order}")
    err = np.abs(best - prev) + roundoff
    return best, err, ladder


def _polarisation_matrix(order: int, directions) -> np.ndarray:
    alphas = multi_indices(order)
    A = np.empty((len(directions), len(alphas)))
    for j, alpha in enumerate(alphas):
        A[:, j] = multinomial(alpha) * np.prod(directions ** np.array(alpha), axis=1)
    return A


@lru_cache(maxsize=512)
def _tensor_cached(state: StateSpec, q: tuple, order: int, h0: float) -> BalancedTensor:
    alphas = multi_indices(order)
    if order == 0:
        d0 = float(np.asarray(state.subtracted(np.array(q), np.zeros((1, 4))))[0])
        return BalancedTensor(0, {alphas[0]: d0}, {alphas[0]: EVAL_RELATIVE_PRECISION * abs(d0)})
    directions = ray_directions(order)
    g, g_err, _ = directional_derivatives(state, np.array(q), order, directions, h0)
    A = _polarisation_matrix(order, directions)
    pinv = np.linalg.pinv(A)
    values = pinv @ g
    # least-squares misfit of the rays counts toward the error as well
    misfit = np.max(np.abs(A @ values - g)) if len(g) > len(alphas) else 0.0
    errors = np.abs(pinv) @ g_err + np.abs(pinv).sum(axis=1) * misfit
    return BalancedTensor(
        order,
        {a: float(v) for a, v in zip(alphas, values)},
        {a: float(e) for a, e in zip(alphas, errors)},
    )


def balanced_tensor(state: StateSpec, q, order: int, h0: float | None = None) -> BalancedTensor:
    if order < 0 or order > N_MAX:
        raise OrderTooHigh(f"order {order} outside 0..{N_MAX}")
    if h0 is None:
        h0 = default_h0(state, q)
    q = tuple(float(c) for c in np.asarray(q, dtype=float))
    return _tensor_cached(state, q, int(order), float(h0))


def balanced_derivative(state: StateSpec, q, alpha, h0: float | None = None) -> tuple[float, float]:
    """(value, err_est) of the alpha-th balanced derivative of the Wick square at q."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != 4 or min(alpha) < 0:
        raise ValueError("alpha must be four non-negative integers")
    tensor = balanced_tensor(state, q, sum(alpha), h0)
    return tensor.components[alpha], tensor.errors[alpha]
