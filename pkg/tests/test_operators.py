"""Nystrom operators, traces, cumulants and Fredholm determinants."""
import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpfield.errors import CapacityError, DomainError, ResolutionError, SpectrumError
from dpfield.kernels import KernelSpec
from dpfield.operators import (
    DENSE_MAX_NODES,
    DiscretizedOperator,
    IntervalFamily,
    check_spectrum,
    count_distribution,
    counting_cumulants,
    covariance_matrix,
    discretize,
    fredholm_generating,
    joint_cumulant_11,
    trace_power,
    variance_of_count,
)
from dpfield.experiments import AIRY_WINDOW_END


# --------------------------------------------------------------------------
# independent oracles
# --------------------------------------------------------------------------
def random_kernel(rng, m):
    q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    lam = rng.uniform(0, 1, m)
    return (q * lam) @ q.T


def enumerate_count_law(a):
    """P(#S = k) of the finite DPP with marginal kernel ``a`` by subset enumeration.

    ``P(S = J) = |det(a - I_{J^c})|`` summed over all subsets ``J``.
    """
    m = a.shape[0]
    p = np.zeros(m + 1)
    for mask in itertools.product((0, 1), repeat=m):
        d = a - np.diag(1.0 - np.array(mask, float))
        p[sum(mask)] += abs(np.linalg.det(d))
    return p


def cumulants_from_law(p, ell_max):
    k = np.arange(p.size, dtype=float)
    mom = [1.0] + [float(np.sum(p * k ** j)) for j in range(1, ell_max + 1)]
    kap = [0.0] * (ell_max + 1)
    for n in range(1, ell_max + 1):
        kap[n] = mom[n] - sum(math.comb(n - 1, j - 1) * kap[j] * mom[n - j] for j in range(1, n))
    return np.array(kap[1:])


# --------------------------------------------------------------------------
# intervals and discretization
# --------------------------------------------------------------------------
def test_interval_family_validation():
    assert len(IntervalFamily.single(0, 1)) == 1
    with pytest.raises(DomainError):
        IntervalFamily(())
    with pytest.raises(DomainError):
        IntervalFamily(((1.0, 0.0),))
    with pytest.raises(DomainError):
        IntervalFamily(((0.0, 2.0), (1.0, 3.0)))
    IntervalFamily(((0.0, 1.0), (1.0, 2.0)))  # touching is fine
    IntervalFamily(((0.0, 2.0), (1.0, 3.0)), disjoint=False)


def test_discretize_errors():
    with pytest.raises(ResolutionError):
        discretize(KernelSpec("sine"), (0, 1), 3)
    with pytest.raises(DomainError):
        discretize(KernelSpec("sine"), (0, math.inf))
    with pytest.raises(DomainError):
        discretize(KernelSpec("bessel", alpha=0), (-1, 1))
    with pytest.raises(DomainError):
        discretize(KernelSpec("sine"), (-math.inf, 0))


def test_sine_trace_is_length():
    op = discretize(KernelSpec("sine"), (0.0, 10.0), 10)
    assert trace_power(op, 1) == pytest.approx(10.0, abs=1e-12)


def test_sine_variance_matches_closed_form():
    """Exact number variance of the sine process on an interval of length L."""
    from scipy.special import sici
    L = 20.0
    op = discretize(KernelSpec("sine"), (0.0, L))
    x = 2 * math.pi * L
    si, ci = sici(x)
    exact = (math.log(x) + np.euler_gamma - ci) / math.pi ** 2 + L - 2 * L * si / math.pi + (1 - math.cos(x)) / math.pi ** 2
    assert variance_of_count(op) == pytest.approx(exact, abs=1e-8)


def test_sine_variance_leading_terms():
    op = discretize(KernelSpec("sine"), (0.0, 20.0))
    approx = (math.log(2 * math.pi * 20.0) + np.euler_gamma + 1) / math.pi ** 2
    assert abs(variance_of_count(op) - approx) < 0.05


def test_projection_has_zero_variance():
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(5, 5)))
    p = q[:, :3] @ q[:, :3].T
    op = DiscretizedOperator.from_matrix(p)
    assert abs(variance_of_count(op)) < 1e-12
    rep = counting_cumulants(op, 6)
    np.testing.assert_allclose(rep.cumulants, [3, 0, 0, 0, 0, 0], atol=1e-10)


def test_trace_methods_agree():
    op = discretize(KernelSpec("airy"), (-15.0, 2.0))
    for k in (1, 2, 3, 5):
        e = trace_power(op, k, "eig")
        m = trace_power(op, k, "matmul")
        a = trace_power(op, k)
        assert e == pytest.approx(m, abs=1e-11)
        assert a == pytest.approx(m, abs=1e-11)
    with pytest.raises(DomainError):
        trace_power(op, 0)
    with pytest.raises(DomainError):
        trace_power(op, 2, "bogus")


def test_convergence_in_resolution():
    spec = KernelSpec("bessel", alpha=0.0)
    v = [variance_of_count(discretize(spec, (0.0, 1000.0), npu)) for npu in (8, 12, 16)]
    assert abs(v[1] - v[2]) < 1e-9
    assert abs(v[0] - v[2]) < 1e-6


def test_airy_tail_cutoff_and_unfolded_intervals():
    op = discretize(KernelSpec("airy"), (-5.0, math.inf))
    assert op.nodes.max() <= 12.0
    # unfolded Airy interval (z0, z1) counts the same points as its raw preimage
    spec_u = KernelSpec("airy", coordinates="unfolded")
    from dpfield.kernels import unfold
    u = unfold(spec_u)
    z0, z1 = float(u.forward(-30.0)), float(u.forward(-4.0))
    raw = discretize(KernelSpec("airy"), (-30.0, -4.0))
    unf = discretize(spec_u, (z0, z1))
    assert trace_power(unf, 1) == pytest.approx(trace_power(raw, 1), abs=1e-10)


def test_bessel_mean_close_to_leading_term():
    for t in (100.0, 1000.0, 10000.0):
        op = discretize(KernelSpec("bessel", alpha=0.0), (0.0, t))
        assert abs(trace_power(op, 1) - math.sqrt(t) / math.pi) < 0.5


@pytest.mark.xfail(strict=True, reason=(
    "the window (-T, a) omits the points above a, about one particle; the bounded "
    "remainder holds for (-T, +inf), see test_airy_mean_full_half_line"))
def test_airy_mean_on_variance_window():
    for t in (20.0, 80.0, 320.0):
        op = discretize(KernelSpec("airy"), (-t, AIRY_WINDOW_END))
        assert abs(trace_power(op, 1) - 2 / (3 * math.pi) * t ** 1.5) < 1


def test_airy_mean_full_half_line():
    for t in (20.0, 80.0, 320.0):
        op = discretize(KernelSpec("airy"), (-t, math.inf))
        assert abs(trace_power(op, 1) - 2 / (3 * math.pi) * t ** 1.5) < 1


def test_dense_capacity():
    op = discretize(KernelSpec("sine"), (0.0, DENSE_MAX_NODES / 6 + 10), 6)
    with pytest.raises(CapacityError):
        op.matrix
    # blockwise traces remain available
    assert trace_power(op, 1) == pytest.approx(DENSE_MAX_NODES / 6 + 10, rel=1e-12)


# --------------------------------------------------------------------------
# cumulants
# --------------------------------------------------------------------------
def test_cumulants_match_enumeration_on_random_kernels():
    rng = np.random.default_rng(20240501)
    for trial in range(100):
        m = 1 + trial % 5
        a = random_kernel(rng, m)
        rep = counting_cumulants(DiscretizedOperator.from_matrix(a), 6)
        ref = cumulants_from_law(enumerate_count_law(a), 6)
        np.testing.assert_allclose(rep.cumulants, ref, atol=1e-10)
        assert counting_cumulants(DiscretizedOperator.from_matrix(a), 8).trace_chain_holds()


def test_bernoulli_cumulants():
    """A rank-one kernel with eigenvalue p gives Bernoulli(p) cumulants."""
    p = 0.3
    rep = counting_cumulants(DiscretizedOperator.from_matrix([[p]]), 4)
    np.testing.assert_allclose(rep.cumulants, [p, p * (1 - p), p * (1 - p) * (1 - 2 * p),
                                               p * (1 - p) * (1 - 6 * p * (1 - p))], atol=1e-15)


@pytest.mark.parametrize("spec,iv", [
    (KernelSpec("sine"), (0.0, 6.0)),
    (KernelSpec("airy"), (-12.0, 1.0)),
    (KernelSpec("bessel", alpha=1.0), (0.0, 200.0)),
    (KernelSpec("so_odd", n=10), (0.0, 4.0)),
])
def test_trace_chain_on_discretized_operators(spec, iv):
    rep = counting_cumulants(discretize(spec, iv), 8)
    assert rep.trace_chain_holds()
    assert rep.variance == pytest.approx(rep.cumulants[1])


def test_cumulant_order_limits():
    op = DiscretizedOperator.from_matrix([[0.5]])
    with pytest.raises(CapacityError):
        counting_cumulants(op, 13)


# --------------------------------------------------------------------------
# covariance and generating function
# --------------------------------------------------------------------------
def test_covariance_matrix_consistency():
    spec = KernelSpec("sine")
    op = discretize(spec, IntervalFamily(((0.0, 3.0), (3.0, 5.0))))
    cov = covariance_matrix(op)
    assert cov[0, 1] == pytest.approx(cov[1, 0])
    whole = discretize(spec, (0.0, 5.0))
    assert cov.sum() == pytest.approx(variance_of_count(whole), abs=1e-9)
    assert cov[0, 1] == pytest.approx(joint_cumulant_11(spec, (0.0, 3.0), (3.0, 5.0)), abs=1e-12)
    assert cov[0, 1] < 0
    with pytest.raises(DomainError):
        joint_cumulant_11(spec, (0.0, 3.0), (2.0, 5.0))


def test_fredholm_at_one_and_zero():
    op = discretize(KernelSpec("airy"), (-6.0, 2.0))
    assert fredholm_generating(op, 1.0) == 1.0
    assert abs(fredholm_generating(op, [1.0]) - 1.0) < 1e-12
    p = count_distribution(op)
    assert p[0] == pytest.approx(fredholm_generating(op, 0.0), abs=1e-12)
    with pytest.raises(DomainError):
        fredholm_generating(op, [0.5, 0.5])


def test_count_distribution_moments():
    op = discretize(KernelSpec("bessel", alpha=0.0), (0.0, 400.0))
    p = count_distribution(op)
    k = np.arange(p.size)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    mean = float(np.sum(k * p))
    assert mean == pytest.approx(trace_power(op, 1), abs=1e-10)
    assert float(np.sum((k - mean) ** 2 * p)) == pytest.approx(variance_of_count(op), abs=1e-9)


def test_count_distribution_grows_to_avoid_aliasing():
    op = discretize(KernelSpec("sine"), (0.0, 100.0), 8)
    p = count_distribution(op, n_points=16)
    assert p.size >= 128
    assert np.argmax(p) == 100


def test_joint_generating_function_per_interval():
    op = discretize(KernelSpec("sine"), IntervalFamily(((0.0, 2.0), (2.0, 3.0))))
    p0 = count_distribution(op, interval=0)
    p1 = count_distribution(op, interval=1)
    assert float(np.sum(np.arange(p0.size) * p0)) == pytest.approx(2.0, abs=1e-10)
    assert float(np.sum(np.arange(p1.size) * p1)) == pytest.approx(1.0, abs=1e-10)
    # the joint generating function factorizes only at z = 1
    g = fredholm_generating(op, [0.5, 0.5])
    assert g == pytest.approx(fredholm_generating(op, 0.5), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.0, 1.0))
def test_generating_function_is_polynomial_in_z(shift, z):
    """E z^nu = sum_k P(k) z^k for real z in [0, 1]."""
    op = discretize(KernelSpec("airy"), (-4.0 + shift, 1.0), 8)
    p = count_distribution(op)
    assert fredholm_generating(op, z) == pytest.approx(float(np.polyval(p[::-1], z)), abs=1e-12)


# --------------------------------------------------------------------------
# spectrum checks and serialization
# --------------------------------------------------------------------------
def test_check_spectrum():
    np.testing.assert_array_equal(check_spectrum(np.array([-1e-12, 0.5, 1 + 1e-12])), [0.0, 0.5, 1.0])
    with pytest.raises(SpectrumError):
        check_spectrum(np.array([0.5, 1.1]))
    with pytest.raises(SpectrumError):
        DiscretizedOperator.from_matrix([[2.0]]).eigenvalues


def test_matrix_validation():
    with pytest.raises(DomainError):
        DiscretizedOperator.from_matrix([[0.5, 0.1], [0.0, 0.5]])
    with pytest.raises(DomainError):
        DiscretizedOperator.from_matrix(np.ones((2, 3)))


def test_json_round_trip():
    op = discretize(KernelSpec("bessel", alpha=0.5), IntervalFamily(((0.0, 10.0), (10.0, 30.0))), 8)
    doc = op.to_json()
    assert json.loads(doc)["format"] == "dpfield.operator/1"
    back = DiscretizedOperator.from_json(doc)
    np.testing.assert_array_equal(back.matrix, op.matrix)
    np.testing.assert_array_equal(back.interval_tags, op.interval_tags)
    assert back.spec == op.spec
    assert tuple(back.intervals) == tuple(op.intervals)
    with pytest.raises(DomainError):
        DiscretizedOperator.from_json('{"format": "other"}')
