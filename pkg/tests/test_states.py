import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import kv

from localkms.errors import ImagScaleOutOfStrip, OffShell, OnLightcone, PathUnavailable
from localkms.minkowski import as_beta, boost, minkowski_dot
from localkms.states import (
    HotBang,
    Kms,
    Mixed,
    PointwiseThermal,
    ThermalMeasure,
    Translated,
    Vacuum,
    hotbang_wightman,
    kms_wightman,
    onshell_density,
    separation,
    state_from_dict,
    state_to_dict,
    thermal_part,
    two_point,
    vacuum_wightman,
)

REST = np.array([1.0, 0, 0, 0])


def coth_kernel(beta, z0, r):
    """Massless thermal Wightman kernel in closed form (rest frame, point separation)."""
    a = np.pi * (r - z0) / beta
    b = np.pi * (r + z0) / beta
    return (1.0 / np.tanh(a) + 1.0 / np.tanh(b)) / (8.0 * np.pi * beta * r)


def bessel_vacuum(m, z0, r):
    s = np.sqrt(r**2 - z0**2 + 0j)
    return m * kv(1, m * s) / (4.0 * np.pi**2 * s)


def massive_images(beta, m, z0, r, n_max=60):
    n = np.concatenate([np.arange(-n_max, 0), np.arange(1, n_max + 1)])
    return sum(bessel_vacuum(m, z0 + 1j * k * beta, r) for k in n)


def strip_points(rng, count, beta, r_range=(0.1, 1.5)):
    r = rng.uniform(*r_range, count)
    t = rng.uniform(-0.8, 0.8, count) * r
    sigma = rng.uniform(0.05, 0.95, count) * beta
    return t, r, sigma


def test_vacuum_unit_value():
    # point separation 2 xi = (0, 1, 0, 0)
    w = vacuum_wightman(0.0, None, [0, 0.5, 0, 0])
    assert w == pytest.approx(1.0 / (4 * np.pi**2), rel=1e-14)


def test_separation_doubles_real_part_only():
    Z = separation([0.1, 0.2, 0, 0], 0.3).point_separation()
    np.testing.assert_allclose(Z, [0.2 + 0.3j, 0.4, 0, 0])


@pytest.mark.parametrize("beta", [0.7, 1.0, 2.5])
def test_massless_kms_matches_coth(beta, rng):
    t, r, sigma = strip_points(rng, 40, beta)
    Z = np.zeros((40, 4), dtype=complex)
    Z[:, 0] = t + 1j * sigma
    Z[:, 1] = r
    expected = coth_kernel(beta, t + 1j * sigma, r)
    for path in ("images", "quadrature"):
        got = Kms(as_beta(beta)).kernel(None, Z, path=path)
        np.testing.assert_allclose(got, expected, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("mass,beta", [(1.0, 1.0), (0.5, 2.0)])
def test_massive_kms_matches_image_sum(mass, beta, rng):
    t, r, sigma = strip_points(rng, 20, beta)
    Z = np.zeros((20, 4), dtype=complex)
    Z[:, 0] = t + 1j * sigma
    Z[:, 2] = r
    got = thermal_part(beta, mass, Z, path="quadrature")
    expected = massive_images(beta, mass, t + 1j * sigma, r)
    np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-12)


def test_massive_vacuum_quadrature_cross_check(rng):
    t, r, sigma = strip_points(rng, 10, 1.0)
    Z = np.zeros((10, 4), dtype=complex)
    Z[:, 0] = t + 1j * sigma
    Z[:, 3] = r
    closed = vacuum_wightman(1.0, None, separation(Z.real / 2, sigma))
    quad = vacuum_wightman(1.0, None, separation(Z.real / 2, sigma), path="quadrature")
    np.testing.assert_allclose(quad, closed, rtol=1e-9)


def test_kms_approaches_vacuum_at_low_temperature():
    Z = np.array([[0.0, 0.7, 0, 0]], dtype=complex)
    cold = Kms(as_beta(400.0)).kernel(None, Z)
    assert cold[0] == pytest.approx(vacuum_wightman(0.0, None, Z.real / 2)[0] + 1 / (12 * 400.0**2), rel=1e-8)


@given(st.floats(-1.5, 1.5), st.integers(1, 3))
def test_kms_boost_covariance(eta, axis):
    L = boost(eta, axis)
    beta = as_beta([1.3, 0.2, 0.1, 0.0])
    Z = np.array([0.2, 0.5, -0.3, 0.4]) + 0.4j * beta.direction
    base = Kms(beta).kernel(None, Z[None])
    moved = Kms(as_beta(L @ beta.vector)).kernel(None, (L @ Z)[None])
    np.testing.assert_allclose(moved, base, rtol=1e-9)


def test_hotbang_matches_kms_at_local_beta(rng, acceptance_points):
    for q in acceptance_points:
        beta = as_beta(2.0 * q)
        xi = rng.normal(size=(6, 4)) * 0.3
        xi[:, 0] *= 0.2
        xi = xi[minkowski_dot(xi, xi) < -1e-3]
        for sigma in (0.0, 0.3 * beta.beta_scalar, 0.9 * beta.beta_scalar):
            zeta = separation(xi, sigma, beta.direction)
            np.testing.assert_allclose(
                hotbang_wightman(1.0, q, zeta), kms_wightman(beta, 0.0, q, zeta), rtol=1e-10, atol=1e-14
            )


def test_pointwise_thermal_massless_is_hotbang():
    q = np.array([2.0, 0.5, 0, 0])
    xi = np.array([[0.0, 0.3, 0.1, 0], [0.05, 0, 0.4, 0.2]])
    np.testing.assert_allclose(
        PointwiseThermal(1.0).subtracted(q, xi), HotBang(1.0).subtracted(q, xi), rtol=1e-10
    )


def test_translated_shifts_the_point():
    s = np.array([0.5, 0.2, 0, 0])
    q = np.array([2.0, 0.5, 0, 0])
    xi = np.array([[0.0, 0.3, 0, 0]])
    t = Translated(HotBang(1.0), s)
    np.testing.assert_allclose(t.subtracted(q, xi), HotBang(1.0).subtracted(q - s, xi))
    np.testing.assert_allclose(t.local_beta(q).vector, 2.0 * (q - s))


def test_mixed_is_weighted_sum():
    m = ThermalMeasure.from_lists([1.0, 2.0], [0.3, 0.7])
    xi = np.array([[0.0, 0.2, 0.1, 0.0]])
    expect = 0.3 * Kms(as_beta(1.0)).subtracted(None, xi) + 0.7 * Kms(as_beta(2.0)).subtracted(None, xi)
    np.testing.assert_allclose(Mixed(m).subtracted(None, xi), expect, rtol=1e-14)


def test_measure_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        ThermalMeasure.from_lists([1.0, 2.0], [0.3, 0.6])
    with pytest.raises(ValueError):
        ThermalMeasure.from_lists([1.0, 2.0], [1.2, -0.2])


def test_two_point_uses_difference():
    x = np.array([1.0, 0.0, 0, 0])
    y = np.array([1.1, 0.8, 0, 0])
    st_ = Kms(as_beta(1.0))
    assert two_point(st_, x, y) == pytest.approx(st_.kernel(None, (y - x) + 0j))
    assert two_point(st_, x, y) == pytest.approx(two_point(st_, y, x))


def test_evaluation_errors():
    k = Kms(as_beta(1.0))
    with pytest.raises(OnLightcone):
        k.kernel(None, np.array([1.0, 0.5, 0, 0], dtype=complex))
    with pytest.raises(ImagScaleOutOfStrip):
        k.kernel(None, np.array([0, 0.5, 0, 0]) + 1.0j * REST)
    with pytest.raises(PathUnavailable):
        k.kernel(None, np.array([0, 0.5, 0, 0]) + 0.3j * np.array([0, 1.0, 0, 0]))
    with pytest.raises(PathUnavailable):
        thermal_part(1.0, 1.0, np.array([0, 0.5, 0, 0]) + 0j, path="images")
    with pytest.raises(OffShell):
        onshell_density(k, None, np.array([[1.0, 0.5, 0, 0]]))


momenta = st.tuples(
    st.floats(0.05, 5.0), st.floats(-1, 1), st.floats(0, 2 * np.pi), st.sampled_from([-1.0, 1.0])
)


@given(momenta, st.floats(0.3, 3.0), st.floats(-0.6, 0.6))
def test_detailed_balance_identity(p_spec, beta_s, vel):
    mag, cz, phi, sign = p_spec
    sz = np.sqrt(1 - cz**2)
    p = np.array([sign * mag, mag * sz * np.cos(phi), mag * sz * np.sin(phi), mag * cz])
    beta = as_beta(beta_s * np.array([1.0, vel, 0, 0]) / np.sqrt(1 - vel**2))
    k = Kms(beta)
    lhs = k.density(None, p)
    rhs = np.exp(minkowski_dot(beta.vector, p)) * k.density(None, -p)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_vacuum_density_is_positive_frequency():
    p = np.array([[1.0, 1.0, 0, 0], [-1.0, 1.0, 0, 0]])
    np.testing.assert_array_equal(Vacuum().density(None, p), [1.0, 0.0])


states = st.one_of(
    st.builds(Vacuum, st.floats(0, 2)),
    st.builds(lambda b, m: Kms(as_beta(b), m), st.floats(0.2, 5), st.floats(0, 2)),
    st.builds(HotBang, st.floats(0.1, 3)),
    st.builds(lambda w: Mixed(ThermalMeasure.from_lists([1.0, 2.0], [w, 1 - w])), st.floats(0.01, 0.99)),
    st.builds(lambda g: Translated(HotBang(g), np.array([0.5, 0.1, 0, 0])), st.floats(0.1, 3)),
    st.builds(PointwiseThermal, st.floats(0.1, 3), st.floats(0, 2)),
)


@given(states)
def test_serialisation_roundtrip(state):
    assert state_from_dict(state_to_dict(state)) == state


ALL_STATES = [
    (Vacuum(1.0), None),
    (Kms(as_beta([1.2, 0.3, 0, 0])), None),
    (Kms(as_beta(1.0), 1.0), None),
    (HotBang(1.0), np.array([2.0, 0.5, 0, 0])),
    (Mixed(ThermalMeasure.from_lists([1.0, 2.0], [0.3, 0.7])), None),
    (Translated(HotBang(1.0), np.array([0.5, 0.2, 0, 0])), np.array([2.5, 0.7, 0, 0])),
    (PointwiseThermal(1.0, 1.0), np.array([2.0, 0.5, 0, 0])),
]


@pytest.mark.parametrize("state,q", ALL_STATES)
def test_hermiticity_at_spacelike_points(state, q, rng):
    xi = rng.normal(size=(8, 4)) * 0.4
    xi[:, 0] = 0.3 * np.linalg.norm(xi[:, 1:], axis=1) * rng.uniform(-1, 1, 8)
    np.testing.assert_allclose(wightman_pair(state, q, -xi), np.conj(wightman_pair(state, q, xi)), rtol=1e-12, atol=1e-15)


def wightman_pair(state, q, xi):
    return state.kernel(q, 2.0 * xi + 0j)


def test_kms_independent_of_q(rng):
    zeta = separation(np.array([[0.0, 0.3, 0.1, 0.0]]), 0.2)
    ref = kms_wightman(1.0, 0.0, np.zeros(4), zeta)
    for q in rng.normal(size=(5, 4)):
        assert kms_wightman(1.0, 0.0, q, zeta) == ref


def test_mixed_convex_linear_in_measure():
    xi = separation(np.array([[0.0, 0.3, 0.1, 0.0]]), 0.2)
    parts = [kms_wightman(b, 0.0, None, xi) for b in (1.0, 2.0)]
    from localkms.states import mixed_wightman

    for w in (0.0, 0.25, 1.0):
        m = ThermalMeasure.from_lists([1.0, 2.0], [w, 1 - w])
        np.testing.assert_allclose(mixed_wightman(m, 0.0, None, xi), w * parts[0] + (1 - w) * parts[1], rtol=1e-14)


def test_hotbang_examples():
    xi = np.array([[0.0, 0.3, 0.1, 0.0], [0.05, -0.2, 0.3, 0.1]])
    np.testing.assert_allclose(
        hotbang_wightman(0.5, [1.0, 0, 0, 0], xi), kms_wightman([1.0, 0, 0, 0], 0.0, None, xi), rtol=1e-8
    )
    np.testing.assert_allclose(
        hotbang_wightman(1.0, [2.0, 1.0, 0, 0], xi), kms_wightman([4.0, 2.0, 0, 0], 0.0, None, xi), rtol=1e-8
    )
    from localkms.errors import NotInForwardCone

    with pytest.raises(NotInForwardCone):
        hotbang_wightman(1.0, [0.0, 1.0, 0, 0], xi)


def test_zero_temperature_limit():
    xi = np.array([[0.0, 0.2, 0.0, 0.0], [0.0, 0.1, 0.15, 0.0]])
    hot = kms_wightman(1e3, 0.0, None, xi)
    np.testing.assert_allclose(hot, vacuum_wightman(0.0, None, xi), rtol=1e-6)
    assert np.all(hot.imag == 0)


def test_massive_vacuum_decays():
    r = np.array([2.0, 4.0, 8.0])
    xi = np.zeros((3, 4))
    xi[:, 1] = r
    w = np.abs(vacuum_wightman(1.0, None, xi))
    assert np.all(w <= np.exp(-2 * 1.0 * r))


def test_measure_examples():
    xi = np.array([[0.0, 0.3, 0.1, 0.0]])
    from localkms.balanced import balanced_derivative
    from localkms.states import mixed_wightman

    point = ThermalMeasure.from_lists([1.3], [1.0])
    np.testing.assert_array_equal(mixed_wightman(point, 0.0, None, xi), kms_wightman(1.3, 0.0, None, xi))
    half = ThermalMeasure.from_lists([1.0, 2.0], [0.5, 0.5])
    mean = 0.5 * (kms_wightman(1.0, 0.0, None, xi) + kms_wightman(2.0, 0.0, None, xi))
    np.testing.assert_allclose(mixed_wightman(half, 0.0, None, xi), mean, rtol=1e-14)
    th, _ = balanced_derivative(Mixed(ThermalMeasure.from_lists([1.0, 2.0], [0.3, 0.7])), np.zeros(4), (0, 0, 0, 0))
    assert th == pytest.approx(0.3 / 12 + 0.7 / 48, rel=1e-12)


def test_density_examples():
    k = Kms(as_beta(1.0))
    p = np.array([np.log(2.0), 0.0, 0.0, np.log(2.0)])
    assert k.density(None, p) == pytest.approx(2.0, rel=1e-14)
    assert k.density(None, np.array([800.0, 800.0, 0, 0])) == 1.0
