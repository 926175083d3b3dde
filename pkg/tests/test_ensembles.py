"""Samplers, rescaling, exact DPP sampling and CSV streaming."""
import io
import math

import numpy as np
import pytest
from scipy import stats

from dpfield.ensembles import (
    Ensemble,
    RescaleSpec,
    compact_matrix,
    count_in_intervals,
    gue_matrix,
    haar_orthogonal,
    haar_symplectic,
    haar_unitary,
    replica_seed,
    rescale,
    sample_compact,
    sample_dpp,
    sample_gue,
    sample_lue,
    samples_from_csv,
    samples_to_csv,
    spectral_dpp_sampler,
)
from dpfield.errors import CapacityError, ConfigError, DomainError, SpectrumError
from dpfield.kernels import KernelSpec
from dpfield.operators import DiscretizedOperator, count_distribution, discretize
from dpfield.stats import total_variation


def test_gue_entry_variances():
    h = np.array([gue_matrix(8, s) for s in range(3000)])
    n = 8
    assert np.allclose(h, np.conj(np.transpose(h, (0, 2, 1))))
    # real components are N(0, (1 + delta_ij) / (8n))
    assert np.var(h[:, 0, 0].real) == pytest.approx(2 / (8 * n), rel=0.1)
    assert np.var(h[:, 0, 1].real) == pytest.approx(1 / (8 * n), rel=0.1)
    assert np.var(h[:, 0, 1].imag) == pytest.approx(1 / (8 * n), rel=0.1)


def test_semicircle():
    vals = sample_gue(1000, 1).values
    ks = stats.kstest((vals + 1) / 2, stats.beta(1.5, 1.5).cdf).statistic
    assert ks < 0.05


def test_tridiagonal_gue_matches_dense():
    a = np.concatenate([sample_gue(40, replica_seed(1, i)).values for i in range(400)])
    b = np.concatenate([sample_gue(40, replica_seed(2, i), method="tridiagonal").values for i in range(400)])
    assert stats.ks_2samp(a, b).pvalue > 1e-3
    top = sample_gue(300, 5, method="tridiagonal", lower=0.9).values
    full = sample_gue(300, 5, method="tridiagonal").values
    np.testing.assert_allclose(top, full[full > 0.9], atol=1e-12)
    with pytest.raises(ConfigError):
        sample_gue(10, 0, method="other")


def test_laguerre_density():
    vals = sample_lue(1000, 0, 2).values
    assert vals.min() >= 0 and vals.max() <= 1.01
    ks = stats.kstest(vals, stats.beta(0.5, 1.5).cdf).statistic
    assert ks < 0.05


def test_lue_routes_agree():
    a = np.concatenate([sample_lue(30, 2, replica_seed(3, i), method="ginibre").values for i in range(300)])
    b = np.concatenate([sample_lue(30, 2, replica_seed(4, i), method="bidiagonal").values for i in range(300)])
    assert stats.ks_2samp(a, b).pvalue > 1e-3
    with pytest.raises(ConfigError):
        sample_lue(10, 0.5, 0, method="ginibre")
    with pytest.raises(DomainError):
        sample_lue(10, -1.5, 0)


def test_square_wishart_smallest_value():
    """For alpha = 0, n^2 * 4 * min is exactly Exp(1/4)-distributed (median 4 log 2 under the 4n^2 map)."""
    m = np.array([sample_lue(20, 0, replica_seed(9, i)).values[0] for i in range(3000)])
    y = 4 * 20 ** 2 * 4 * m
    assert stats.kstest(y, stats.expon(scale=4.0).cdf).pvalue > 1e-3


def test_haar_matrices_are_in_their_groups():
    u = haar_unitary(6, 0)
    assert np.allclose(u @ u.conj().T, np.eye(6))
    o = haar_orthogonal(7, 1)
    assert np.allclose(o @ o.T, np.eye(7))
    assert np.linalg.det(o) == pytest.approx(1.0)
    s = haar_symplectic(4, 2)
    j = np.block([[np.zeros((4, 4)), np.eye(4)], [-np.eye(4), np.zeros((4, 4))]])
    assert np.allclose(s @ s.conj().T, np.eye(8))
    assert np.allclose(s.T @ j @ s, j)
    with pytest.raises(DomainError):
        compact_matrix("gue", 3, 0)


def test_haar_unitary_eigenangles_uniform():
    ang = np.concatenate([sample_compact("unitary", 5, replica_seed(0, i)).values for i in range(400)])
    assert stats.kstest(ang / (2 * math.pi), "uniform").pvalue > 1e-3


@pytest.mark.parametrize("group", ["so_even", "so_odd", "sp"])
def test_compact_angle_density_matches_kernel(group):
    """Eigenangle one-point density equals the finite kernel's diagonal."""
    n = 3
    s = sample_compact(group, n, 0)
    assert s.values.size == n
    assert np.all((s.values >= 0) & (s.values <= math.pi))
    assert s.fixed_one == (group == "so_odd")
    from dpfield.kernels import compact_scale
    c = compact_scale(group, n)
    x = np.concatenate([c * sample_compact(group, n, replica_seed(1, i)).values for i in range(2000)])
    edges = np.linspace(0, c * math.pi, 7)
    counts = np.histogram(x, edges)[0] / 2000
    op_means = [float(np.sum(discretize(KernelSpec(group, n=n), (edges[i], edges[i + 1]), 20).diagonal))
                for i in range(6)]
    np.testing.assert_allclose(counts, op_means, atol=0.06)


def test_seeds_are_reproducible():
    a = sample_compact("sp", 4, replica_seed(11, 3)).values
    b = sample_compact("sp", 4, replica_seed(11, 3)).values
    c = sample_compact("sp", 4, replica_seed(11, 4)).values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_array_equal(sample_gue(5, 3).values, sample_gue(5, 3).values)


def test_capacity_limits():
    with pytest.raises(CapacityError):
        sample_gue(5000, 0)
    with pytest.raises(CapacityError):
        sample_compact("unitary", 3000, 0)
    with pytest.raises(DomainError):
        sample_compact("unitary", 0, 0)


def test_rescale_and_count():
    g = sample_gue(50, 0)
    y = rescale(g, RescaleSpec("soft_edge"))
    np.testing.assert_allclose(y, 2 * 50 ** (2 / 3) * (g.values - 1))
    lue = sample_lue(50, 1, 0)
    np.testing.assert_allclose(rescale(lue, RescaleSpec("hard_edge")), 4 * 50 ** 2 * 4 * lue.values)
    np.testing.assert_allclose(rescale(lue, RescaleSpec("hard_edge", "4n")), 4 * 50 * 4 * lue.values)
    u = sample_compact("unitary", 10, 0)
    np.testing.assert_allclose(rescale(u, RescaleSpec("bulk_compact")), 10 * u.values / (2 * math.pi))
    with pytest.raises(ConfigError):
        rescale(g, RescaleSpec("hard_edge"))
    with pytest.raises(ConfigError):
        RescaleSpec("soft_edge", "5n")
    pts = np.array([0.0, 1.0, 1.5, 2.0, 3.0])
    np.testing.assert_array_equal(count_in_intervals(pts, [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]), [1, 2, 1])


def test_dpp_sampler_matches_fredholm_law():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    a = (q * np.array([0.9, 0.6, 0.3, 0.1])) @ q.T
    op = DiscretizedOperator.from_matrix(a)
    draw = spectral_dpp_sampler(op)
    gen = np.random.default_rng(0)
    sizes = np.array([draw(gen).size for _ in range(20000)])
    emp = np.bincount(sizes, minlength=5) / sizes.size
    assert total_variation(emp, count_distribution(op)) < 0.02
    idx = sample_dpp(op, 3)
    assert np.all(np.diff(idx) > 0)


def test_dpp_inclusion_probabilities():
    a = np.array([[0.5, 0.3], [0.3, 0.5]])
    op = DiscretizedOperator.from_matrix(a)
    draw = spectral_dpp_sampler(op)
    gen = np.random.default_rng(1)
    draws = [set(draw(gen).tolist()) for _ in range(20000)]
    p0 = np.mean([0 in d for d in draws])
    p01 = np.mean([d == {0, 1} for d in draws])
    assert p0 == pytest.approx(0.5, abs=0.015)
    assert p01 == pytest.approx(0.25 - 0.09, abs=0.015)


def test_dpp_rejects_bad_spectrum():
    with pytest.raises(SpectrumError):
        sample_dpp(DiscretizedOperator.from_matrix([[1.5]]), 0)


def test_csv_round_trip():
    draws = [sample_compact("sp", 3, replica_seed(1, i)) for i in range(3)] + [sample_gue(2, 7)]
    buf = io.StringIO()
    samples_to_csv(draws, buf)
    buf.seek(0)
    back = samples_from_csv(buf)
    assert [b.ensemble for b in back] == [Ensemble.SP] * 3 + [Ensemble.GUE]
    for a, b in zip(draws, back):
        np.testing.assert_array_equal(a.values, b.values)
        assert a.seed == b.seed
