"""Local thermal equilibrium checks: sharp and mixed temperature, order N."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .balanced import N_MAX, balanced_tensor, multi_indices, multi_indices_upto
from .errors import DegenerateTensor, EmptyGrid, Infeasible, NotThermal, OrderTooHigh
from .minkowski import ETA, InverseTemperatureVector, as_beta, decompose_beta, minkowski_dot
from .states import StateSpec, ThermalMeasure
from .thermo import thermal_function, thermal_tensor

DEFAULT_TOL = 1e-5
FEASIBILITY_THRESHOLD = 1e-6
ROW_WEIGHT_FLOOR = 1e-9
ERR_FACTOR = 3.0


@dataclass
class LteReport:
    q: np.ndarray
    order: int
    mode: str
    residuals: dict
    errors: dict
    tolerance_used: float
    fitted_beta: InverseTemperatureVector | None = None
    fitted_measure: ThermalMeasure | None = None
    fit_residual: float | None = None
    reason: str = ""
    verdict: str = field(init=False)

    def __post_init__(self):
        ok = bool(self.residuals) and all(
            r <= max(self.tolerance_used, ERR_FACTOR * self.errors[a]) for a, r in self.residuals.items()
        )
        if self.reason:
            ok = False
        self.verdict = "pass" if ok else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def max_residual(self) -> float:
        return max(self.residuals.values(), default=float("nan"))

    def to_dict(self) -> dict:
        out = {
            "q": [float(c) for c in self.q],
            "order": self.order,
            "mode": self.mode,
            "verdict": self.verdict,
            "tolerance_used": self.tolerance_used,
            "max_residual": self.max_residual(),
            "residuals": {"".join(map(str, a)): r for a, r in self.residuals.items()},
            "fitted_beta": None if self.fitted_beta is None else [float(c) for c in self.fitted_beta.vector],
            "fit_residual": self.fit_residual,
            "reason": self.reason,
        }
        if self.fitted_measure is not None:
            out["fitted_measure"] = [
                {"beta": [float(c) for c in b.vector], "weight": float(w)} for b, w in self.fitted_measure.atoms
            ]
        return out


def _order_scales(tables: list[dict], order: int) -> dict:
    """Per-order normalisation: max |S| at even orders, geometric mean of neighbours at odd ones."""
    scales = {}
    for n in range(0, order + 2, 2):
        scales[n] = max((abs(v) for t in tables for a, v in t.items() if sum(a) == n), default=0.0)
    for n in range(1, order + 1, 2):
        lo, hi = scales.get(n - 1, 0.0), scales.get(n + 1, 0.0)
        scales[n] = np.sqrt(lo * hi) if hi > 0 else lo
    return {n: (s if s > 0 else 1.0) for n, s in scales.items()}


def _thermal_upto(beta, order: int, mass: float) -> dict:
    out = {}
    for n in range(order + 1):
        out.update(thermal_tensor(beta, n, mass))
    return out


def fit_sharp_beta(state: StateSpec, q) -> tuple[InverseTemperatureVector, float]:
    """beta_scalar from the Wick square, direction from the order-2 tensor.

    Massless field.  Residual is max |T2 - T2_thermal(beta)| / max |T2_thermal(beta)|.
    """
    q = np.asarray(q, dtype=float)
    t0 = balanced_tensor(state, q, 0)
    theta = t0[(0, 0, 0, 0)]
    if not theta > 10.0 * t0.errors[(0, 0, 0, 0)] or theta <= 0:
        raise NotThermal(f"Wick square {theta!r} is not positive at q={tuple(q)}")
    beta_s = np.sqrt(1.0 / (12.0 * theta))
    t2 = balanced_tensor(state, q, 2).values
    energy = -0.25 * t2
    mixed = ETA @ energy  # E^mu_nu
    vals, vecs = np.linalg.eig(mixed)
    candidates = []
    for lam, v in zip(vals, vecs.T):
        if abs(lam.imag) > 1e-9 * max(1.0, abs(lam.real)) or np.max(np.abs(v.imag)) > 1e-9:
            continue
        v = v.real
        if minkowski_dot(v, v) > 1e-9 * np.dot(v, v):
            candidates.append(v)
    if len(candidates) != 1:
        raise DegenerateTensor(f"{len(candidates)} timelike eigendirections of the order-2 tensor")
    e = candidates[0]
    e = e / np.sqrt(minkowski_dot(e, e))
    if e[0] < 0:
        e = -e
    beta = decompose_beta(beta_s * e)
    model = np.array(list(thermal_tensor(beta, 2).values()))
    observed = np.array(list(balanced_tensor(state, q, 2).components.values()))
    residual = float(np.max(np.abs(observed - model)) / np.max(np.abs(model)))
    return beta, residual


def _compare(state, q, order, reference: dict, tables_for_scale: list[dict]):
    scales = _order_scales(tables_for_scale, order)
    residuals, errors = {}, {}
    for n in range(order + 1):
        tensor = balanced_tensor(state, q, n)
        for a in multi_indices(n):
            residuals[a] = abs(tensor[a] - reference[a]) / scales[n]
            errors[a] = tensor.errors[a] / scales[n]
    return residuals, errors


def check_lte(
    state: StateSpec,
    q,
    order: int,
    tol: float = DEFAULT_TOL,
    mode: str = "sharp",
    grid=None,
) -> LteReport:
    """Compare the state's balanced derivatives up to ``order`` with thermal values.

    ``mode='sharp'`` fits one beta (see :func:`fit_sharp_beta`); ``mode='mixed'``
    fits a measure on ``grid``.  Residuals are per multi-index, normalised by
    the largest thermal value of the same order.
    """
    q = np.asarray(q, dtype=float)
    if order > N_MAX:
        raise OrderTooHigh(f"order {order} exceeds {N_MAX}")
    mass = state.mass
    if mode == "sharp":
        try:
            beta, fit_res = fit_sharp_beta(state, q)
        except (NotThermal, DegenerateTensor) as exc:
            return LteReport(q, order, mode, {}, {}, tol, reason=f"{type(exc).__name__}: {exc}")
        reference = _thermal_upto(beta, order, mass)
        residuals, errors = _compare(state, q, order, reference, [reference])
        return LteReport(q, order, mode, residuals, errors, tol, fitted_beta=beta, fit_residual=fit_res)
    if mode == "mixed":
        try:
            measure, fit_res = fit_mixed_measure(state, q, order, grid)
        except (Infeasible, EmptyGrid) as exc:
            return LteReport(q, order, mode, {}, {}, tol, reason=f"{type(exc).__name__}: {exc}")
        tables = [_thermal_upto(b, order, mass) for b in measure.betas]
        reference = {a: sum(w * t[a] for w, t in zip(measure.weights, tables)) for a in tables[0]}
        residuals, errors = _compare(state, q, order, reference, tables)
        return LteReport(q, order, mode, residuals, errors, tol, fitted_measure=measure, fit_residual=fit_res)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class MeasureFit:
    measure: ThermalMeasure
    residual: float  # l2 norm of the mismatch beyond ERR_FACTOR * err_est per moment
    raw_residual: float  # plain l2 norm of the normalised mismatch


def fit_mixed_measure_detailed(state: StateSpec, q, order: int, grid) -> MeasureFit:
    if grid is None or len(grid) == 0:
        raise EmptyGrid("beta grid is empty")
    if order > N_MAX:
        raise OrderTooHigh(f"order {order} exceeds {N_MAX}")
    q = np.asarray(q, dtype=float)
    grid = [as_beta(b) for b in grid]
    mass = state.mass
    tables = [_thermal_upto(b, order, mass) for b in grid]
    scales = _order_scales(tables, order)
    alphas = multi_indices_upto(order)
    A = np.array([[t[a] / scales[sum(a)] for t in tables] for a in alphas])
    m = np.empty(len(alphas))
    s = np.empty(len(alphas))
    for n in range(order + 1):
        tensor = balanced_tensor(state, q, n)
        for i, a in enumerate(alphas):
            if sum(a) == n:
                m[i] = tensor[a] / scales[n]
                s[i] = tensor.errors[a] / scales[n]
    # rows weighted by 1/err so noisy high orders cannot drag the exact low ones
    row_w = 1.0 / (s + ROW_WEIGHT_FLOOR)
    lam = 1e4 * row_w.max()  # simplex constraint as a heavily weighted extra row
    A_aug = np.vstack([A * row_w[:, None], lam * np.ones(len(grid))])
    m_aug = np.append(m * row_w, lam)
    w, _ = optimize.nnls(A_aug, m_aug, maxiter=50 * len(grid))
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    mismatch = A @ w - m
    raw = float(np.linalg.norm(mismatch))
    excess = float(np.linalg.norm(np.maximum(np.abs(mismatch) - ERR_FACTOR * s, 0.0)))
    atoms = tuple((b, float(wi)) for b, wi in zip(grid, w) if wi > 0)
    total = sum(wi for _, wi in atoms)
    atoms = tuple((b, wi / total) for b, wi in atoms)
    return MeasureFit(ThermalMeasure(atoms), excess, raw)


def fit_mixed_measure(state: StateSpec, q, order: int, grid) -> tuple[ThermalMeasure, float]:
    """Non-negative weights on ``grid`` summing to one that match moments up to ``order``.

    Moments of each order are divided by the largest grid value of that order
    and each row is weighted by the inverse of its finite-difference error.
    The residual is the l2 norm of what remains of the mismatch after each
    moment is allowed 3 x its error estimate; above the threshold the problem
    is declared infeasible.
    """
    fit = fit_mixed_measure_detailed(state, q, order, grid)
    if fit.residual > FEASIBILITY_THRESHOLD:
        raise Infeasible(f"moment mismatch {fit.residual:.3e} exceeds {FEASIBILITY_THRESHOLD:g}")
    return fit.measure, fit.residual


def forward_cone_samples(rng: np.random.Generator, count: int, apex=(0.0, 0.0, 0.0, 0.0),
                         t_range=(1.0, 3.0), opening: float = 0.6) -> np.ndarray:
    """Points apex + (t, x) with t uniform in t_range and |x| <= opening * t."""
    apex = np.asarray(apex, dtype=float)
    t = rng.uniform(*t_range, size=count)
    direction = rng.normal(size=(count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = opening * t * rng.uniform(0.0, 1.0, size=count) ** (1.0 / 3.0)
    pts = np.empty((count, 4))
    pts[:, 0] = t
    pts[:, 1:] = direction * radius[:, None]
    return pts + apex


@dataclass
class AffineBetaFit:
    c: float
    b: np.ndarray
    residual: float
    betas: np.ndarray


def check_affine_beta_detailed(state: StateSpec, samples) -> AffineBetaFit:
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 5:
        raise ValueError("need at least 5 sample points")
    betas = np.array([fit_sharp_beta(state, q)[0].vector for q in samples])
    n = len(samples)
    X = np.zeros((4 * n, 5))
    X[:, 0] = samples.ravel()
    for mu in range(4):
        X[mu::4, 1 + mu] = 1.0
    coef, *_ = np.linalg.lstsq(X, betas.ravel(), rcond=None)
    fitted = X @ coef
    residual = float(np.max(np.abs(fitted - betas.ravel())))
    return AffineBetaFit(float(coef[0]), coef[1:], residual, betas)


def check_affine_beta(state: StateSpec, samples) -> tuple[float, np.ndarray, float]:
    """Least-squares fit of beta(q) = c q + b over per-point sharp fits."""
    fit = check_affine_beta_detailed(state, samples)
    return fit.c, fit.b, fit.residual
