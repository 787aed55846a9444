"""Local KMS checks at a point: detailed balance, strip periodicity, clustering
and the Klein-Gordon residual used for the massive no-go test."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LocalKMSError, NotThermal, StencilNotSpacelike
from .minkowski import InverseTemperatureVector, as_beta, decompose_beta, minkowski_dot, rest_frame_boost
from .states import Kms, Mixed, StateSpec, Vacuum

DETAILED_BALANCE_TOL = 1e-8
PERIODICITY_TOL = 1e-4
CLUSTER_TOL = 1e-6
RATE_FIT_FLOOR = 1e-12


# ---------------------------------------------------------------- sample sets


def shell_momenta(rng: np.random.Generator, count: int, mass: float = 0.0,
                  p_range=(0.05, 4.0)) -> np.ndarray:
    """On-shell momenta, log-uniform |p|, isotropic, both frequency signs."""
    mag = np.exp(rng.uniform(np.log(p_range[0]), np.log(p_range[1]), size=count))
    n = rng.normal(size=(count, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    sign = np.where(rng.uniform(size=count) < 0.5, -1.0, 1.0)
    p = np.empty((count, 4))
    p[:, 0] = sign * np.sqrt(mag**2 + mass**2)
    p[:, 1:] = n * mag[:, None]
    return p


def standard_xi_grid(e, count: int = 20, r_range=(0.2, 1.0)) -> np.ndarray:
    """Spacelike separations xi built in the rest frame of e, then boosted."""
    k = np.arange(count)
    r = np.linspace(*r_range, count)
    z = 1.0 - (2.0 * k + 1.0) / count
    rho = np.sqrt(1.0 - z**2)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    xi_rest = np.empty((count, 4))
    xi_rest[:, 0] = 0.5 * r * np.sin(1.7 * k)
    xi_rest[:, 1:] = r[:, None] * np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return xi_rest @ rest_frame_boost(np.asarray(e, dtype=float)).T


def standard_kg_pairs() -> list[tuple[np.ndarray, np.ndarray]]:
    """Spacelike pairs x = q - xi, y = q + xi with q well inside V+ and |xi| ~ 1."""
    centres = np.array([[1.5, 0.0, 0.0, 0.0], [2.0, 0.3, 0.0, 0.0], [2.5, 0.0, 0.4, 0.0]])
    halves = np.array([[0.0, 1.0, 0.0, 0.0], [0.1, 0.0, 1.0, 0.3], [0.2, 0.6, 0.0, 0.9]])
    return [(c - x, c + x) for c, x in zip(centres, halves)]


# ---------------------------------------------------------------- detailed balance


def detailed_balance_residuals(state: StateSpec, q, beta, momenta) -> np.ndarray:
    beta = as_beta(beta)
    p = np.asarray(momenta, dtype=float)
    rho_p = state.density(q, p)
    rho_m = state.density(q, -p)
    with np.errstate(over="ignore", invalid="ignore"):
        diff = rho_p - np.exp(minkowski_dot(beta.vector, p)) * rho_m
    return np.abs(diff) / (1.0 + np.abs(rho_p))


def detailed_balance_residual(state: StateSpec, q, beta, momenta) -> float:
    """max_p |rho(p) - exp(beta.p) rho(-p)| / (1 + |rho(p)|) over on-shell momenta."""
    return float(np.max(detailed_balance_residuals(state, q, beta, momenta)))


def fit_lkms_beta(state: StateSpec, q, momenta) -> InverseTemperatureVector:
    """Intrinsic beta from the density ratio: log(rho(p)/rho(-p)) = beta.p."""
    p = np.asarray(momenta, dtype=float)
    p = p[p[:, 0] > 0]
    rho_p = state.density(q, p)
    rho_m = state.density(q, -p)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = rho_p / rho_m
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        raise NotThermal("density ratio rho(p)/rho(-p) is not a positive finite exponential")
    X = p * np.array([1.0, -1.0, -1.0, -1.0])
    coef, *_ = np.linalg.lstsq(X, np.log(ratio), rcond=None)
    try:
        return decompose_beta(coef)
    except LocalKMSError as exc:
        raise NotThermal(str(exc)) from exc


# ---------------------------------------------------------------- strip periodicity


def _extrapolate_to_zero(x, y):
    """Polynomial (Neville) extrapolation of samples y(x) to x = 0 along axis 0."""
    x = np.asarray(x, dtype=float)
    y = [np.asarray(v) for v in y]
    n = len(x)
    for m in range(1, n):
        y = [(x[i + m] * y[i] - x[i] * y[i + 1]) / (x[i + m] - x[i]) for i in range(n - m)]
    return y[0]


@dataclass
class PeriodicityResult:
    residual: float
    eta_ladder: np.ndarray
    upper_ladder: np.ndarray  # sup |F(xi + i(beta - eta)e) - w(-xi)| per eta
    lower_ladder: np.ndarray  # sup |F(xi + i eta e) - w(xi)| per eta
    upper_extrapolated: float
    lower_extrapolated: float


def periodicity_details(state: StateSpec, q, beta, xi_grid, eta_ladder) -> PeriodicityResult:
    beta = as_beta(beta)
    xi = np.asarray(xi_grid, dtype=float)
    etas = np.asarray(eta_ladder, dtype=float)
    if np.any(etas <= 0) or np.any(etas >= beta.beta_scalar / 2):
        raise ValueError("eta ladder must lie in (0, beta/2)")
    X = 2.0 * xi
    if np.any(minkowski_dot(X, X) >= 0):
        raise StencilNotSpacelike("periodicity grid must be spacelike")
    e = beta.direction
    w_plus = state.kernel(q, X + 0j)
    w_minus = state.kernel(q, -X + 0j)
    upper, lower = [], []
    for eta in etas:
        upper.append(state.kernel(q, X + 1j * (beta.beta_scalar - eta) * e) - w_minus)
        lower.append(state.kernel(q, X + 1j * eta * e) - w_plus)
    up0 = _extrapolate_to_zero(etas, upper)
    lo0 = _extrapolate_to_zero(etas, lower)
    up_ext = float(np.max(np.abs(up0)))
    lo_ext = float(np.max(np.abs(lo0)))
    return PeriodicityResult(
        residual=max(up_ext, lo_ext),
        eta_ladder=etas,
        upper_ladder=np.array([np.max(np.abs(u)) for u in upper]),
        lower_ladder=np.array([np.max(np.abs(v)) for v in lower]),
        upper_extrapolated=up_ext,
        lower_extrapolated=lo_ext,
    )


def boundary_periodicity_check(state: StateSpec, q, beta, xi_grid, eta_ladder) -> float:
    """Extrapolated sup-norm of the two strip boundary mismatches."""
    return periodicity_details(state, q, beta, xi_grid, eta_ladder).residual


def default_eta_ladder(beta) -> np.ndarray:
    b = as_beta(beta).beta_scalar
    return b * np.array([0.02, 0.01, 0.005])


def sampled_growth_exponent(state: StateSpec, q, beta, radii=(1.0, 2.0, 4.0, 8.0, 16.0), n_sigma: int = 5) -> float:
    """Power-law exponent of max |F_q| over the strip on spheres of growing radius.

    Only a finite sample of the strip is inspected, so the result is a
    sampled bound on polynomial growth, not a proof of it.
    """
    beta = as_beta(beta)
    b = beta.beta_scalar
    sigmas = b * np.linspace(0.1, 0.9, n_sigma)
    sup = []
    for rad in radii:
        xi = standard_xi_grid(beta.direction, 12, (rad, rad))
        Z = 2.0 * xi[None, :, :] + 1j * sigmas[:, None, None] * beta.direction
        sup.append(np.max(np.abs(state.kernel(q, Z.reshape(-1, 4)))))
    return float(np.polyfit(np.log(radii), np.log(sup), 1)[0])


# ---------------------------------------------------------------- clustering


@dataclass
class ClusterProfile:
    t: np.ndarray
    sigmas: np.ndarray
    abs_w_sigma: np.ndarray  # (len(sigmas), len(t))
    abs_w: np.ndarray  # sigma -> 0 extrapolation
    fitted_rate: float
    tol: float = CLUSTER_TOL

    @property
    def passed(self) -> bool:
        return bool(self.abs_w[-1] < self.tol)

    def rows(self):
        """(t, sigma, abs_w, fitted_rate) rows; sigma = 0 marks the extrapolated profile."""
        for s, prof in zip(self.sigmas, self.abs_w_sigma):
            for t, a in zip(self.t, prof):
                yield float(t), float(s), float(a), self.fitted_rate
        for t, a in zip(self.t, self.abs_w):
            yield float(t), 0.0, float(a), self.fitted_rate


def cluster_check(state: StateSpec, q, e, t_grid, sigma0: float = 0.1, tol: float = CLUSTER_TOL) -> ClusterProfile:
    """|w_q(t e)| along the ray, from strip values at sigma0, sigma0/2, sigma0/4.

    The real timelike ray is a distributional boundary; the profile is the
    polynomial extrapolation sigma -> 0 of the strip-interior values.  The
    fitted rate is minus the slope of log|w| against t, fitted on the points
    still above the roundoff floor.
    """
    e = np.asarray(e, dtype=float)
    if abs(minkowski_dot(e, e) - 1.0) > 1e-10 or e[0] <= 0:
        raise ValueError("e must be a future-directed unit timelike vector")
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("t grid must be increasing")
    sigmas = sigma0 * np.array([1.0, 0.5, 0.25])
    X = 2.0 * t[:, None] * e[None, :]
    vals = [state.kernel(q, X + 1j * s * e) for s in sigmas]
    extrap = np.abs(_extrapolate_to_zero(sigmas, vals))
    # far along the ray |w| is a cancellation remainder; keep it out of the rate fit
    mask = extrap > RATE_FIT_FLOOR * np.max(np.abs(vals[0]))
    if mask.sum() >= 2:
        slope = np.polyfit(t[mask], np.log(extrap[mask]), 1)[0]
    else:
        slope = -np.inf
    return ClusterProfile(t, sigmas, np.abs(np.array(vals)), extrap, float(-slope), tol)


# ---------------------------------------------------------------- Klein-Gordon residual


def _two_point_batch(state: StateSpec, X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Z = (Y - X) + 0j
    if isinstance(state, (Kms, Vacuum, Mixed)):
        return state.kernel(None, Z)
    Q = 0.5 * (X + Y)
    return np.array([state.kernel(qq, zz[None, :])[0] for qq, zz in zip(Q, Z)])


def kg_residuals(state: StateSpec, sample_pairs, h: float, mass: float) -> np.ndarray:
    """|(box + m^2)_x omega_2(x, y)| / |omega_2(x, y)| for each pair.

    box = d_t^2 - laplacian with three-point second differences of step h in
    every coordinate direction (nine evaluations per pair).
    """
    pairs = [(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for x, y in sample_pairs]
    shifts = np.vstack([np.zeros(4), h * np.eye(4), -h * np.eye(4)])
    X, Y = [], []
    for x, y in pairs:
        sep = x + shifts - y
        if np.any(minkowski_dot(sep, sep) >= 0):
            raise StencilNotSpacelike("Klein-Gordon stencil leaves the spacelike region")
        X.append(x + shifts)
        Y.append(np.broadcast_to(y, shifts.shape))
    vals = _two_point_batch(state, np.vstack(X), np.vstack(Y)).reshape(len(pairs), 9)
    centre = vals[:, 0]
    second = (vals[:, 1:5] - 2.0 * centre[:, None] + vals[:, 5:9]) / h**2
    box = second[:, 0] - second[:, 1] - second[:, 2] - second[:, 3]
    return np.abs(box + mass**2 * centre) / np.abs(centre)


def kg_residual(state: StateSpec, sample_pairs, h: float, mass: float | None = None) -> float:
    if mass is None:
        mass = state.mass
    return float(np.max(kg_residuals(state, sample_pairs, h, mass)))


# ---------------------------------------------------------------- combined report


@dataclass
class LkmsReport:
    q: np.ndarray
    beta: InverseTemperatureVector | None
    detailed_balance_residual: float
    periodicity_residual: float
    periodicity_ladder: list
    cluster_profile: ClusterProfile | None
    kg_residual: float | None
    verdicts: dict = field(default_factory=dict)
    reason: str = ""
    growth_exponent: float | None = None  # sampled bound only

    @property
    def verdict(self) -> str:
        ok = bool(self.verdicts) and all(v == "pass" for v in self.verdicts.values()) and not self.reason
        return "pass" if ok else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "q": [float(c) for c in self.q],
            "beta": None if self.beta is None else [float(c) for c in self.beta.vector],
            "detailed_balance_residual": self.detailed_balance_residual,
            "periodicity_residual": self.periodicity_residual,
            "periodicity_ladder": self.periodicity_ladder,
            "cluster_end_abs_w": None if self.cluster_profile is None else float(self.cluster_profile.abs_w[-1]),
            "cluster_fitted_rate": None if self.cluster_profile is None else self.cluster_profile.fitted_rate,
            "kg_residual": self.kg_residual,
            "growth_exponent": self.growth_exponent,
            "growth_bound": "sampled bound",
            "verdicts": dict(self.verdicts),
            "verdict": self.verdict,
            "reason": self.reason,
        }


def check_lkms(
    state: StateSpec,
    q,
    beta=None,
    *,
    momenta=None,
    xi_grid=None,
    eta_ladder=None,
    t_grid=None,
    seed: int = 0,
    tol_balance: float = DETAILED_BALANCE_TOL,
    tol_periodicity: float = PERIODICITY_TOL,
    tol_cluster: float = CLUSTER_TOL,
) -> LkmsReport:
    """Run all local KMS sub-checks at q.

    Without ``beta`` the inverse temperature is fitted intrinsically from the
    momentum-space density ratio, so the verdict does not depend on the LTE fit.
    """
    q = np.asarray(q, dtype=float)
    rng = np.random.default_rng(seed)
    if momenta is None:
        momenta = shell_momenta(rng, 1000, state.mass)
    nan = float("nan")
    if beta is None:
        try:
            beta = fit_lkms_beta(state, q, momenta)
        except (NotThermal, LocalKMSError) as exc:
            return LkmsReport(q, None, nan, nan, [], None, None, {}, reason=f"{type(exc).__name__}: {exc}")
    beta = as_beta(beta)
    verdicts = {}
    db = detailed_balance_residual(state, q, beta, momenta)
    verdicts["detailed_balance"] = "pass" if db <= tol_balance else "fail"
    if xi_grid is None:
        xi_grid = standard_xi_grid(beta.direction, 20, (0.2 * beta.beta_scalar, beta.beta_scalar))
    if eta_ladder is None:
        eta_ladder = default_eta_ladder(beta)
    try:
        per = periodicity_details(state, q, beta, xi_grid, eta_ladder)
        per_res = per.residual
        ladder = [[float(a), float(b), float(c)] for a, b, c in zip(per.eta_ladder, per.upper_ladder, per.lower_ladder)]
    except LocalKMSError:
        per_res, ladder = float("inf"), []
    verdicts["periodicity"] = "pass" if per_res <= tol_periodicity else "fail"
    if t_grid is None:
        t_grid = beta.beta_scalar * np.linspace(0.5, 5.0, 10)
    try:
        prof = cluster_check(state, q, beta.direction, t_grid, 0.1 * beta.beta_scalar, tol_cluster)
        verdicts["cluster"] = "pass" if prof.passed else "fail"
    except LocalKMSError:
        prof = None
        verdicts["cluster"] = "fail"
    try:
        growth = sampled_growth_exponent(state, q, beta)
    except LocalKMSError:
        growth = None
    return LkmsReport(q, beta, db, per_res, ladder, prof, None, verdicts, growth_exponent=growth)
