"""Special functions against mpmath and exact identities."""
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpfield import specfun
from dpfield.errors import CapacityError, DomainError
from dpfield.specfun import (
    airy_ai,
    airy_ai_prime,
    airy_coeffs,
    airy_pair,
    bessel_j,
    bessel_j_prime,
    hankel_coeffs,
    hermite_table,
    hermite_triple,
    weber_hermite,
)
from dpfield.kernels import airy_density_ode_residual

mp.mp.dps = 30


def _envelope_airy(y):
    """Scale of Ai on the oscillatory side (|y|^{-1/4}) and 1 elsewhere."""
    return np.maximum(np.abs(y), 1.0) ** -0.25 if y < 0 else max(float(mp.airyai(y)), 1e-300)


@pytest.mark.parametrize("y", [-200.0, -73.3, -20.0, -9.5, -8.9, -6.0, -3.01, -2.99, -1.0, 0.0,
                               0.7, 2.99, 3.01, 6.0, 8.99, 9.01, 15.0, 30.0])
def test_airy_matches_mpmath(y):
    ai, aip = airy_pair(y)
    ref = float(mp.airyai(y))
    refp = float(mp.airyai(y, derivative=1))
    if y < 0:
        scale = abs(y) ** -0.25
        assert abs(ai - ref) < 1e-11 * scale
        assert abs(aip - refp) < 1e-11 * abs(y) ** 0.25
    else:
        assert ai == pytest.approx(ref, rel=1e-11)
        assert aip == pytest.approx(refp, rel=1e-11)


def test_airy_vectorized_and_scalar_agree():
    y = np.linspace(-30, 10, 41)
    vec = airy_ai(y)
    assert vec.shape == y.shape
    np.testing.assert_allclose(vec, [airy_ai(float(t)) for t in y], rtol=1e-13, atol=1e-300)
    assert isinstance(airy_ai(1.0), float)
    np.testing.assert_array_equal(airy_ai_prime(y), airy_pair(y)[1])


def test_airy_known_values():
    # Ai(0) = 3^{-2/3} / Gamma(2/3), Ai'(0) = -3^{-1/3} / Gamma(1/3)
    assert airy_ai(0.0) == pytest.approx(0.355028053887817239, rel=1e-14)
    assert airy_ai_prime(0.0) == pytest.approx(-0.258819403792806798, rel=1e-14)


def test_airy_rejects_non_finite():
    with pytest.raises(DomainError):
        airy_ai(np.nan)
    with pytest.raises(DomainError):
        airy_ai(np.array([0.0, np.inf]))


def test_airy_coefficients_exact():
    c = airy_coeffs(3, exact=True)
    assert c[0].u_s == 1 and c[0].v_s == 1
    assert c[1].u_s == Fraction(5, 72)
    assert c[1].v_s == Fraction(-7, 72)
    assert c[2].u_s == Fraction(385, 10368)
    assert c[2].v_s == Fraction(-455, 10368)
    floats = airy_coeffs(3)
    assert floats[2].u_s == pytest.approx(385 / 10368)
    with pytest.raises(DomainError):
        airy_coeffs(-1)


def test_hankel_coefficients():
    alpha = 0.3
    c = hankel_coeffs(alpha, 3)
    mu = 4 * alpha * alpha
    assert c[0].A_s == 1 and c[0].B_s == 1
    assert c[1].A_s == pytest.approx((mu - 1) / 8)
    assert c[2].A_s == pytest.approx((mu - 1) * (mu - 9) / 128)
    for s in range(1, 4):
        assert c[s].B_s == pytest.approx(c[s].A_s + (s - 0.5) * c[s - 1].A_s)


def test_airy_branch_overlap():
    """Power series and asymptotic expansion agree around |y| = 7 (absolute 1e-9)."""
    y = np.concatenate([-np.linspace(6.0, 7.5, 7), np.linspace(6.0, 7.5, 7)])
    s_ai, s_aip = specfun._airy_series(y)
    a_ai, a_aip = specfun._airy_asymptotic(y)
    assert np.max(np.abs(s_ai - a_ai)) < 1e-9
    assert np.max(np.abs(s_aip - a_aip)) < 1e-9


def test_airy_bridge_meets_asymptotic_relatively():
    """On the decaying side the Taylor bridge agrees with the asymptotic expansion to high relative accuracy."""
    y = np.linspace(9.0, 9.0 - 4 * specfun.AIRY_BRIDGE_STEP, 5)
    b_ai, b_aip = specfun._airy_bridge(y)
    a_ai, a_aip = specfun._airy_asymptotic(y)
    np.testing.assert_allclose(b_ai, a_ai, rtol=1e-9)
    np.testing.assert_allclose(b_aip, a_aip, rtol=1e-9)


def test_airy_ode_residual_small():
    y = np.arange(-20.0, 5.0 + 1e-9, 0.1)
    assert np.max(np.abs(specfun.airy_ode_residual(y))) < 1e-5
    for t in (-10.0, 0.0, 3.0):
        assert abs(specfun.airy_ode_residual(t)) < 1e-5


def test_airy_density_third_order_ode():
    y = np.linspace(-20, 5, 251)
    # third differences amplify rounding by 1/h^3, hence the looser bound
    assert np.max(np.abs(airy_density_ode_residual(y))) < 1e-4


@pytest.mark.parametrize("alpha", [0.0, 0.5, -0.5, 1.0, 2.0, 2.3, -0.7, 10.0])
@pytest.mark.parametrize("x", [0.01, 0.9, 5.0, 11.9, 12.5, 14.0, 15.9, 16.1, 30.0, 150.0, 1000.0])
def test_bessel_matches_mpmath(alpha, x):
    ref = float(mp.besselj(alpha, x))
    env = max(abs(ref), float(mp.sqrt(2 / (mp.pi * x))) if x > alpha else abs(ref))
    assert abs(bessel_j(alpha, x) - ref) < 1e-10 * env
    if x > 0:
        refp = float(mp.diff(lambda t: mp.besselj(alpha, t), x))
        envp = max(abs(refp), float(mp.sqrt(2 / (mp.pi * x))) if x > alpha else abs(refp))
        assert abs(bessel_j_prime(alpha, x) - refp) < 1e-9 * envp


@pytest.mark.parametrize("x", [0.3, 2.0, 7.7, 13.0, 22.0, 80.0])
def test_half_integer_closed_forms(x):
    c = np.sqrt(2 / (np.pi * x))
    assert abs(bessel_j(0.5, x) - c * np.sin(x)) < 1e-10
    assert abs(bessel_j(-0.5, x) - c * np.cos(x)) < 1e-10
    assert abs(bessel_j(1.5, x) - c * (np.sin(x) / x - np.cos(x))) < 1e-10


def test_bessel_at_zero():
    assert bessel_j(0.0, 0.0) == 1.0
    assert bessel_j(2.0, 0.0) == 0.0
    assert bessel_j_prime(1.0, 0.0) == pytest.approx(0.5)
    assert bessel_j_prime(2.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        bessel_j_prime(0.5, 0.0)
    with pytest.raises(DomainError):
        bessel_j(-1.0, 1.0)
    with pytest.raises(DomainError):
        bessel_j(0.0, -1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.95, 6.0), st.floats(0.05, 200.0))
def test_bessel_recurrence(alpha, x):
    """J_{a-1} + J_{a+1} = (2a/x) J_a, checked through the derivative identity."""
    j = bessel_j(alpha, x)
    jp = bessel_j_prime(alpha, x)
    j1 = bessel_j(alpha + 1, x)
    scale = max(1.0, abs(alpha / x)) * max(abs(j), abs(j1), (2 / (np.pi * x)) ** 0.5 if x > alpha else abs(j))
    assert abs(jp - (alpha / x * j - j1)) < 1e-9 * scale


@pytest.mark.parametrize("ell", [0, 1, 5, 30, 200])
@pytest.mark.parametrize("x", [-3.0, 0.0, 1.7, 12.0, 25.0])
def test_weber_hermite_matches_mpmath(ell, x):
    ref = mp.hermite(ell, x) * mp.exp(-mp.mpf(x) ** 2 / 2) / mp.sqrt(2 ** ell * mp.factorial(ell) * mp.sqrt(mp.pi))
    val = weber_hermite(ell, x)
    assert abs(val - float(ref)) < 1e-11 * max(1.0, abs(float(ref)))


def test_hermite_table_and_triple_consistent():
    x = np.linspace(-5, 5, 9)
    tab = hermite_table(12, x)
    assert tab.shape == (12, x.size)
    lo, mid, hi = hermite_triple(11, x)
    np.testing.assert_allclose(lo, tab[10], atol=1e-14)
    np.testing.assert_allclose(mid, tab[11], atol=1e-14)
    np.testing.assert_allclose(hi, weber_hermite(12, x), atol=1e-14)


def test_hermite_orthonormal():
    x, w = np.polynomial.hermite.hermgauss(60)
    tab = hermite_table(20, x) * np.exp(x * x / 2)
    gram = (tab * w) @ tab.T
    np.testing.assert_allclose(gram, np.eye(20), atol=1e-12)


def test_hermite_capacity():
    with pytest.raises(CapacityError):
        weber_hermite(specfun.HERMITE_MAX_DEGREE + 1, 0.0)
    with pytest.raises(DomainError):
        weber_hermite(-1, 0.0)
