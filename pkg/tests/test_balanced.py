import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from localkms.balanced import (
    balanced_derivative,
    balanced_tensor,
    directional_derivatives,
    fd_weights,
    multi_indices,
    multi_indices_upto,
    multinomial,
    ray_directions,
    richardson,
    to_full_tensor,
)
from localkms.errors import OrderTooHigh, StencilNotSpacelike
from localkms.minkowski import as_beta, minkowski_dot
from localkms.states import HotBang, Kms, StateSpec, Vacuum


@dataclass(frozen=True)
class PolynomialState(StateSpec):
    """D(xi) = sum_alpha coeff_alpha xi^alpha, so d^alpha D(0) = alpha! coeff_alpha."""

    coeffs: tuple  # ((alpha, c), ...)

    def subtracted(self, q, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(c * np.prod(xi ** np.array(a), axis=-1) for a, c in self.coeffs)


def factorial_of(alpha):
    return math.prod(math.factorial(a) for a in alpha)


@pytest.mark.parametrize("n", range(5))
def test_index_counts(n):
    idx = multi_indices(n)
    assert len(idx) == math.comb(n + 3, 3) == len(set(idx))
    assert sum(multinomial(a) for a in idx) == 4**n
    assert len(multi_indices_upto(n)) == math.comb(n + 4, 4)


def test_full_tensor_is_symmetric():
    comps = {a: float(i) for i, a in enumerate(multi_indices(3))}
    T = to_full_tensor(3, comps)
    np.testing.assert_array_equal(T, np.transpose(T, (1, 0, 2)))
    np.testing.assert_array_equal(T, np.transpose(T, (2, 1, 0)))


@given(st.integers(1, 4), st.lists(st.floats(-2, 2), min_size=7, max_size=7))
def test_fd_weights_exact_on_polynomials(order, coef):
    offsets = np.arange(-3, 4)
    w = fd_weights(order, offsets)
    poly = np.polynomial.Polynomial(coef[: len(offsets) - 1])
    h = 0.1
    approx = w @ poly(offsets * h) / h**order
    assert approx == pytest.approx(poly.deriv(order)(0.0), rel=1e-6, abs=1e-6)


def test_richardson_removes_even_powers():
    h = 0.1 / 2.0 ** np.arange(4)
    vals = 1.0 + 3 * h**2 - 5 * h**4 + 7 * h**6
    best, _ = richardson(vals)
    assert best == pytest.approx(1.0, abs=1e-13)


def test_rays_are_spacelike():
    for n in range(1, 5):
        d = ray_directions(n)
        assert len(d) >= 2 * len(multi_indices(n))
        assert np.all(minkowski_dot(d, d) < 0)


def test_timelike_rays_rejected():
    with pytest.raises(StencilNotSpacelike):
        directional_derivatives(Vacuum(), np.zeros(4), 2, np.array([[1.0, 0.1, 0, 0]]), 0.01)


def test_order_limit():
    with pytest.raises(OrderTooHigh):
        balanced_tensor(Kms(as_beta(1.0)), np.zeros(4), 5)


coeff = st.floats(-3, 3, allow_nan=False)


@given(st.integers(2, 4).flatmap(lambda n: st.tuples(st.just(n), st.lists(coeff, min_size=math.comb(n + 3, 3), max_size=math.comb(n + 3, 3)))))
def test_polynomial_jets_recovered(case):
    n, cs = case
    alphas = multi_indices(n)
    state = PolynomialState(tuple(zip(alphas, cs)))
    t = balanced_tensor(state, np.zeros(4), n, h0=0.05)
    for a, c in zip(alphas, cs):
        assert t[a] == pytest.approx(factorial_of(a) * c, abs=1e-7 * (1 + max(map(abs, cs))))


def test_vacuum_has_zero_jets():
    for n in range(5):
        t = balanced_tensor(Vacuum(), np.zeros(4), n, h0=0.05)
        assert max(abs(v) for v in t.components.values()) == 0.0


def test_kms_wick_square():
    value, err = balanced_derivative(Kms(as_beta(1.0)), np.zeros(4), (0, 0, 0, 0))
    assert value == pytest.approx(1 / 12, rel=1e-12)
    assert 0 <= err < 1e-12


@pytest.mark.parametrize("state,q", [(Kms(as_beta([1.2, 0.3, 0, 0])), np.zeros(4)), (HotBang(1.0), np.array([2.0, 0.5, 0, 0]))])
def test_error_estimates_are_honest(state, q):
    t2 = balanced_tensor(state, q, 2)
    t4 = balanced_tensor(state, q, 4)
    from localkms.thermo import thermal_tensor

    beta = state.local_beta(q)
    for tensor, n in ((t2, 2), (t4, 4)):
        ref = thermal_tensor(beta, n)
        for a in multi_indices(n):
            assert tensor.errors[a] >= 0
            assert abs(tensor[a] - ref[a]) <= 10 * tensor.errors[a] + 1e-12 * abs(ref[a])


@dataclass(frozen=True)
class GaussianMock(StateSpec):
    """D(xi) = (1 + (xi_1)^2) exp(-|xi|_E^2): known jet, not a polynomial."""

    def subtracted(self, q, xi):
        xi = np.asarray(xi, dtype=float)
        return (1.0 + xi[..., 1] ** 2) * np.exp(-np.sum(xi * xi, axis=-1))


def test_ladder_contracts_on_smooth_mock():
    d = ray_directions(2)
    _, _, ladder = directional_derivatives(GaussianMock(), np.zeros(4), 2, d, 0.2)
    exact = 2.0 * (d[:, 1] ** 2 - np.sum(d * d, axis=1))  # second derivative at t = 0
    errs = np.abs(ladder - exact).max(axis=1)
    assert np.all(errs[:-1] / errs[1:] >= 3.0)
    t = balanced_tensor(GaussianMock(), np.zeros(4), 2, h0=0.2)
    assert t[(0, 2, 0, 0)] == pytest.approx(0.0, abs=1e-8)
    assert t[(0, 0, 2, 0)] == pytest.approx(-2.0, abs=1e-8)


def test_subtracted_kernel_bounded_near_origin():
    k = Kms(as_beta(1.0))
    vals = [abs(k.subtracted(None, h * np.array([[0.2, 1.0, 0, 0]]))[0]) for h in (1e-1, 1e-3, 1e-5)]
    assert max(vals) < 0.1 and vals[-1] == pytest.approx(1 / 12, rel=1e-8)


def test_kms_tensor_independent_of_q():
    k = Kms(as_beta(1.0))
    a = balanced_tensor(k, np.zeros(4), 2)
    b = balanced_tensor(k, np.array([3.0, -1.0, 2.0, 0.5]), 2)
    for al in multi_indices(2):
        assert abs(a[al] - b[al]) <= a.errors[al] + 1e-15


def test_rest_frame_order_two_structure():
    t = balanced_tensor(Kms(as_beta(1.0)), np.zeros(4), 2)
    for mu in (1, 2, 3):
        a = tuple(1 if i in (0, mu) else 0 for i in range(4))
        assert abs(t[a]) <= t.errors[a] + 1e-15
    T = t.values
    np.testing.assert_array_equal(T, T.T)


def test_hotbang_order_one_vanishes():
    t = balanced_tensor(HotBang(1.0), np.array([3.0, -1.0, 1.0, 0]), 1)
    assert all(abs(t[a]) <= t.errors[a] + 1e-15 for a in multi_indices(1))
