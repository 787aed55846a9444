"""Radial mode integrals and thermal image sums for the free scalar field.

All routines work in the rest frame of a unit timelike vector ``e``.  A complex
point separation ``Z = X + i*sigma*e`` (X real) is described by

* ``z0 = Z.e``  (complex rest-frame time, imaginary part sigma), and
* ``r = |X_perp|`` (real rest-frame radial distance).

The Wightman kernel of the difference variable is ``W(s)`` with ``s = x - y``;
the routines return ``W(-Z)``, which is what ``w_q(xi) = omega_2(q - xi, q + xi)``
needs at ``Z = 2 xi + i sigma e``.
"""

from __future__ import annotations

import numpy as np
from scipy import special

FOUR_PI2 = 4.0 * np.pi**2

_GL_ORDER = 24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
# batch * nodes cap per block (complex128 work arrays)
_BLOCK = 2_000_000
# exp(-40) ~ 4e-18 relative to the leading Bose weight
_DECAY_LOGS = 40.0


def rest_coordinates(Z, e):
    """Return (z0, r) for complex separations Z (..., 4) relative to unit timelike e."""
    Z = np.asarray(Z, dtype=complex)
    e = np.asarray(e, dtype=float)
    z0 = Z[..., 0] * e[0] - Z[..., 1] * e[1] - Z[..., 2] * e[2] - Z[..., 3] * e[3]
    X = Z.real
    x0 = z0.real
    xx = X[..., 0] ** 2 - X[..., 1] ** 2 - X[..., 2] ** 2 - X[..., 3] ** 2
    r2 = np.maximum(x0**2 - xx, 0.0)
    return z0, np.sqrt(r2)


def sin_over_r(p, r):
    """sin(p r)/r with the r -> 0 limit p (broadcasting)."""
    return p * np.sinc(p * r / np.pi)


def vacuum_closed_form(mass: float, zz):
    """W_vac(-Z) from the complex Minkowski square zz = Z.Z (principal branch)."""
    zz = np.asarray(zz, dtype=complex)
    if mass == 0.0:
        return -1.0 / (FOUR_PI2 * zz)
    root = np.sqrt(-zz)
    return mass * special.kv(1, mass * root) / (FOUR_PI2 * root)


def _panels(p_max: float, width: float):
    n_pan = max(1, int(np.ceil(p_max / width)))
    edges = np.linspace(0.0, p_max, n_pan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def _panel_grid(beta: float, mass: float, z0, r):
    sigma_max = float(np.max(z0.imag, initial=0.0))
    gap = beta - sigma_max
    p_max = _DECAY_LOGS / gap + mass
    freq = float(np.max(r + np.abs(z0.real), initial=0.0))
    width = min(np.pi / max(freq, 1e-300), np.pi / beta, 4.0 * gap)
    if mass > 0.0:
        width = min(width, max(mass, 0.25 / beta))
    width = max(width, p_max / 200_000)
    return _panels(p_max, width)


def thermal_radial(beta: float, mass: float, z0, r):
    """Bose part of W_beta(-Z) by Gauss-Legendre panels on the radial integral.

    (1 / (2 pi^2)) * int_0^inf dp p sin(p r)/r * cos(w z0) / (w (e^{beta w} - 1)),
    w = sqrt(p^2 + m^2).  Panels are at most a half period of the fastest
    oscillation wide; the integrand is cut where the Bose tail is below 1e-17.
    """
    z0 = np.asarray(z0, dtype=complex)
    r = np.asarray(r, dtype=float)
    shape = z0.shape
    z0 = z0.ravel()
    r = r.ravel()
    if np.any(z0.imag < 0) or np.any(z0.imag >= beta):
        raise ValueError("imaginary part outside [0, beta)")
    nodes, weights = _panel_grid(beta, mass, z0, r)
    omega = np.sqrt(nodes**2 + mass**2)
    # 1/(e^{beta w} - 1) * e^{+-i w z0} written without overflow
    denom = -np.expm1(-beta * omega)
    radial = weights * nodes / (2.0 * np.pi**2 * omega * denom)
    out = np.empty(z0.shape, dtype=complex)
    step = max(1, _BLOCK // nodes.size)
    for lo in range(0, z0.size, step):
        a = z0[lo:lo + step, None]
        rr = r[lo:lo + step, None]
        phase = 0.5 * (
            np.exp(1j * omega * a.real - (a.imag + beta) * omega)
            + np.exp(-1j * omega * a.real + (a.imag - beta) * omega)
        )
        out[lo:lo + step] = np.sum(sin_over_r(nodes, rr) * phase * radial, axis=1)
    return out.reshape(shape)


def vacuum_radial(mass: float, z0, r):
    """Vacuum W(-Z) by the radial mode integral; requires Im z0 > 0."""
    z0 = np.asarray(z0, dtype=complex)
    r = np.asarray(r, dtype=float)
    shape = z0.shape
    z0 = z0.ravel()
    r = r.ravel()
    sigma_min = float(np.min(z0.imag))
    if sigma_min <= 0:
        raise ValueError("radial vacuum integral needs a positive imaginary part")
    p_max = _DECAY_LOGS / sigma_min + mass
    freq = float(np.max(r + np.abs(z0.real)))
    width = min(np.pi / max(freq, 1e-300), 4.0 * sigma_min)
    if mass > 0:
        width = min(width, mass)
    nodes, weights = _panels(p_max, max(width, p_max / 200_000))
    omega = np.sqrt(nodes**2 + mass**2)
    radial = weights * nodes / (FOUR_PI2 * omega)
    out = np.empty(z0.shape, dtype=complex)
    step = max(1, _BLOCK // nodes.size)
    for lo in range(0, z0.size, step):
        a = z0[lo:lo + step, None]
        rr = r[lo:lo + step, None]
        out[lo:lo + step] = np.sum(sin_over_r(nodes, rr) * np.exp(1j * omega * a) * radial, axis=1)
    return out.reshape(shape)


def _tail_sums(n_img: int):
    """sum_{n > N} n^-k for k = 2, 4, 6, 8 via polygamma."""
    x = n_img + 1.0
    s2 = special.polygamma(1, x)
    s4 = special.polygamma(3, x) / 6.0
    s6 = special.polygamma(5, x) / 120.0
    s8 = special.polygamma(7, x) / 5040.0
    return s2, s4, s6, s8


def thermal_images(beta: float, z0, r, n_img: int = 2000):
    """Massless Bose part of W_beta(-Z) as the sum over thermal images n != 0.

    Each image contributes -1/(4 pi^2 ((z0 + i n beta)^2 - r^2)).  Images with
    |n| <= n_img are summed in +-n pairs; the remainder uses the large-n pair
    expansion through n^-6, whose first omitted term gives the error estimate.
    Returns (value, error_estimate).
    """
    z0 = np.asarray(z0, dtype=complex)
    r = np.asarray(r, dtype=float)
    shape = z0.shape
    z0 = z0.ravel()
    r = r.ravel()
    n = np.arange(1, n_img + 1, dtype=float)
    out = np.empty(z0.shape, dtype=complex)
    step = max(1, _BLOCK // n_img)
    for lo in range(0, z0.size, step):
        a = z0[lo:lo + step, None]
        r2 = r[lo:lo + step, None] ** 2
        shift = 1j * n[None, :] * beta
        terms = 1.0 / ((a + shift) ** 2 - r2) + 1.0 / ((a - shift) ** 2 - r2)
        # sum smallest terms first
        out[lo:lo + step] = np.sum(terms[:, ::-1], axis=1)
    out *= -1.0 / FOUR_PI2
    a = z0 / beta
    c = (z0**2 - r**2) / beta**2
    s2, s4, s6, s8 = _tail_sums(n_img)
    c4 = c - 4 * a**2
    c6 = c**2 - 12 * a**2 * c + 16 * a**4
    tail = 2.0 * (s2 + c4 * s4 + c6 * s6) / (FOUR_PI2 * beta**2)
    c8 = c**3 - 24 * a**2 * c**2 + 80 * a**4 * c - 64 * a**6
    err = np.abs(2.0 * c8 * s8) / (FOUR_PI2 * beta**2) + 1e-16 * np.abs(out + tail)
    return (out + tail).reshape(shape), err.reshape(shape)
