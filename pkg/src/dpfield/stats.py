"""Small statistics toolkit for the Monte Carlo experiments.

Counts are integers, so moment sums are accumulated exactly in integer
arithmetic before any division; this makes aggregated moments independent of
the order in which replicas were produced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr


def normal_cdf(x):
    """Standard normal CDF."""
    return ndtr(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Fit:
    """Ordinary least-squares line ``y = slope * x + intercept``.

    ``residual`` is the root-mean-square residual; ``slope_se`` the usual
    standard error of the slope (``nan`` with fewer than three points).
    """

    slope: float
    intercept: float
    residual: float
    slope_se: float = float("nan")

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual}


def ols_fit(x: Sequence[float], y: Sequence[float]) -> Optional[Fit]:
    """Least-squares line through ``(x, y)``; ``None`` for fewer than two points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return None
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    res = y - a @ coef
    rms = float(np.sqrt(np.mean(res ** 2)))
    se = float("nan")
    if x.size > 2:
        s2 = float(np.sum(res ** 2) / (x.size - 2))
        se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return Fit(float(coef[0]), float(coef[1]), rms, se)


@dataclass(frozen=True)
class MomentSummary:
    """Sample moments of an integer-valued statistic with standard errors."""

    n: int
    mean: float
    se_mean: float
    variance: float
    se_variance: float
    skewness: float
    se_skewness: float
    excess_kurtosis: float
    se_kurtosis: float


def moment_summary(counts) -> MomentSummary:
    """Moments of integer counts with large-sample standard errors.

    The variance uses the unbiased ``1/(N-1)`` normalisation; its standard
    error is ``sqrt((m4 - (N-3)/(N-1) s^4) / N)``.  Skewness and kurtosis use
    the classical ``sqrt(6/N)`` and ``sqrt(24/N)`` errors.
    """
    c = np.asarray(counts)
    n = int(c.size)
    if n < 2:
        raise ValueError("need at least two samples")
    if np.issubdtype(c.dtype, np.integer):
        vals = [int(v) for v in c.ravel()]
        s1 = sum(vals)
        mean = s1 / n
        # exact central sums via integer arithmetic on n * x - s1
        d = [n * v - s1 for v in vals]
        m2 = sum(t * t for t in d) / n ** 3
        m3 = sum(t ** 3 for t in d) / n ** 4
        m4 = sum(t ** 4 for t in d) / n ** 5
    else:
        x = c.astype(float).ravel()
        mean = math.fsum(x) / n
        d = x - mean
        m2 = math.fsum(d ** 2) / n
        m3 = math.fsum(d ** 3) / n
        m4 = math.fsum(d ** 4) / n
    var = m2 * n / (n - 1)
    skew = m3 / m2 ** 1.5 if m2 > 0 else float("nan")
    kurt = m4 / m2 ** 2 - 3.0 if m2 > 0 else float("nan")
    se_var = math.sqrt(max(m4 - (n - 3) / (n - 1) * var * var, 0.0) / n)
    return MomentSummary(
        n, float(mean), math.sqrt(var / n), float(var), se_var,
        float(skew), math.sqrt(6.0 / n), float(kurt), math.sqrt(24.0 / n),
    )


def ks_distance(samples) -> float:
    """Kolmogorov distance between the empirical CDF and ``N(0, 1)``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    cdf = normal_cdf(x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def lattice_ks_distance(counts, mean: Optional[float] = None, sd: Optional[float] = None) -> float:
    """Kolmogorov distance of an integer statistic to a continuity-corrected normal.

    The empirical CDF ``P(nu <= k)`` is compared with
    ``Phi((k + 1/2 - mean) / sd)`` at every integer ``k`` between the extremes
    of the sample; this is the distance between the normalised counts and
    ``N(0, 1)`` evaluated at the midpoints of the count lattice.  A plain
    Kolmogorov distance of a lattice variable to a continuous law is bounded
    below by half its largest atom, so it cannot measure normality of
    low-variance counts.
    """
    c = np.asarray(counts).astype(np.int64).ravel()
    if mean is None:
        mean = float(c.mean())
    if sd is None:
        sd = float(c.std(ddof=1))
    ks = np.arange(c.min() - 1, c.max() + 1)
    emp = np.searchsorted(np.sort(c), ks, side="right") / c.size
    model = normal_cdf((ks + 0.5 - mean) / sd)
    return float(np.max(np.abs(emp - model)))


def correlation_se(rho: float, n: int) -> float:
    """Large-sample standard error ``(1 - rho^2) / sqrt(n)`` of a correlation."""
    return (1.0 - rho * rho) / math.sqrt(n)


def total_variation(p, q) -> float:
    """Total-variation distance between two probability vectors (zero-padded)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = max(p.size, q.size)
    p = np.pad(p, (0, m - p.size))
    q = np.pad(q, (0, m - q.size))
    return 0.5 * float(np.sum(np.abs(p - q)))
