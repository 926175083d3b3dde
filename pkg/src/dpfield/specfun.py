"""Special functions behind the correlation kernels.

Airy ``Ai``/``Ai'``, Bessel ``J_alpha``/``J'_alpha`` and the orthonormal
Weber-Hermite functions, all for real arguments in double precision.

Every function is vectorised over its real argument and returns a Python
``float`` when called with a scalar.  The evaluation strategy combines three
ingredients:

* convergent power series near the origin,
* the classical large-argument asymptotic expansions, truncated at their
  smallest term,
* a Taylor "bridge" between the two: anchor values are generated once by
  stepping the defining ODE with high-order Taylor polynomials, and any point
  in the gap is reached by one short Taylor step from its nearest anchor.

The bridge exists because neither the power series (cancellation) nor the
asymptotic series (optimal truncation error ``~exp(-2*zeta)``) reaches full
double precision at a single shared switchover radius.

All branch boundaries live in the module constants below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from .errors import CapacityError, DomainError

# --------------------------------------------------------------------------
# Branch constants
# --------------------------------------------------------------------------
#: Maclaurin series is used for ``|y| <= AIRY_SERIES_RADIUS``.
AIRY_SERIES_RADIUS = 3.0
#: Asymptotic expansions are used for ``|y| >= AIRY_ASYMPTOTIC_RADIUS``.
AIRY_ASYMPTOTIC_RADIUS = 9.0
#: Spacing of the precomputed Taylor anchors in the Airy bridge region.
AIRY_BRIDGE_STEP = 0.25

#: Ascending series is used for ``x <= max(BESSEL_SERIES_LIMIT, alpha)``.
BESSEL_SERIES_LIMIT = 12.0
#: Hankel expansion is used for ``x >= max(BESSEL_HANKEL_FLOOR, 2 alpha^2)``.
BESSEL_HANKEL_FLOOR = 16.0
#: Spacing of the Taylor anchors in the Bessel bridge region.
BESSEL_BRIDGE_STEP = 0.25

#: Maximal degree accepted by :func:`weber_hermite`.
HERMITE_MAX_DEGREE = 2000

_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)
_SQRT_PI = math.sqrt(math.pi)
_MAX_ASYMPTOTIC_TERMS = 40
_TAYLOR_STEP_TERMS = 40
_TAYLOR_EVAL_TERMS = 30


def _as_float_array(x) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _finish(value: np.ndarray, scalar: bool):
    return float(value) if scalar else value


def _require_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")


# --------------------------------------------------------------------------
# Coefficient sequences
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AiryCoeffs:
    """Coefficients of the Airy asymptotic expansions.

    Attributes
    ----------
    s : int
        Index of the coefficient.
    u_s, v_s : float or Fraction
        ``u_s`` enters the expansion of ``Ai`` and ``v_s`` that of ``Ai'``.
    """

    s: int
    u_s: float
    v_s: float


@dataclass(frozen=True)
class HankelCoeffs:
    """Coefficients ``A_s(alpha)`` and ``B_s(alpha)`` of the Hankel expansions.

    ``A_s`` multiplies ``x^{-s}`` in the expansion of ``J_alpha`` and ``B_s``
    the matching term of ``J'_alpha``.  The latter follows from term-by-term
    differentiation: ``B_s = A_s + (s - 1/2) A_{s-1}``.
    """

    alpha: float
    s: int
    A_s: float
    B_s: float


@lru_cache(maxsize=None)
def _airy_u_exact(s_max: int) -> Tuple[Fraction, ...]:
    out = [Fraction(1)]
    for s in range(1, s_max + 1):
        num = 1
        for j in range(2 * s + 1, 6 * s, 2):
            num *= j
        out.append(Fraction(num, 216 ** s * math.factorial(s)))
    return tuple(out)


def airy_coeffs(s_max: int, exact: bool = False) -> List[AiryCoeffs]:
    """Return the Airy expansion coefficients ``u_s, v_s`` for ``s <= s_max``.

    Parameters
    ----------
    s_max : int
        Largest index, ``s_max >= 0``.
    exact : bool, optional
        Return :class:`fractions.Fraction` values instead of floats.

    Notes
    -----
    ``u_s = (2s+1)(2s+3)...(6s-1) / (216^s s!)`` and
    ``v_s = -(6s+1)/(6s-1) u_s`` for ``s >= 1``; ``u_0 = v_0 = 1``.
    """
    if s_max < 0:
        raise DomainError("s_max must be nonnegative")
    us = _airy_u_exact(int(s_max))
    out = []
    for s, u in enumerate(us):
        v = Fraction(1) if s == 0 else -Fraction(6 * s + 1, 6 * s - 1) * u
        if exact:
            out.append(AiryCoeffs(s, u, v))
        else:
            out.append(AiryCoeffs(s, float(u), float(v)))
    return out


@lru_cache(maxsize=None)
def _airy_uv_float(s_max: int) -> Tuple[np.ndarray, np.ndarray]:
    cs = airy_coeffs(s_max)
    return (np.array([c.u_s for c in cs]), np.array([c.v_s for c in cs]))


def hankel_coeffs(alpha: float, s_max: int) -> List[HankelCoeffs]:
    """Return the Hankel coefficients ``A_s(alpha), B_s(alpha)``, ``s <= s_max``.

    ``A_s(alpha) = prod_{k=1}^{s} (4 alpha^2 - (2k-1)^2) / (s! 8^s)``.
    """
    if s_max < 0:
        raise DomainError("s_max must be nonnegative")
    a, b = _hankel_ab(float(alpha), int(s_max))
    return [HankelCoeffs(float(alpha), s, float(a[s]), float(b[s])) for s in range(s_max + 1)]


@lru_cache(maxsize=256)
def _hankel_ab(alpha: float, s_max: int) -> Tuple[np.ndarray, np.ndarray]:
    mu = 4.0 * alpha * alpha
    a = np.empty(s_max + 1)
    a[0] = 1.0
    for s in range(1, s_max + 1):
        a[s] = a[s - 1] * (mu - (2 * s - 1) ** 2) / (8.0 * s)
    b = a.copy()
    b[1:] += (np.arange(1, s_max + 1) - 0.5) * a[:-1]
    return a, b


# --------------------------------------------------------------------------
# Airy functions
# --------------------------------------------------------------------------
def _airy_series(y: np.ndarray, n_terms: int = 40) -> Tuple[np.ndarray, np.ndarray]:
    """Maclaurin series of ``Ai`` and ``Ai'``; accurate for moderate ``|y|``."""
    y = np.asarray(y, dtype=float)
    y3 = y ** 3
    f = np.ones_like(y)
    g = y.copy()
    fp = np.zeros_like(y)
    gp = np.ones_like(y)
    t, s = np.ones_like(y), y.copy()
    p, q = 0.5 * y * y, np.ones_like(y)
    fp = fp + p
    for k in range(1, n_terms):
        t = t * y3 / ((3 * k - 1) * (3 * k))
        s = s * y3 / ((3 * k) * (3 * k + 1))
        q = q * y3 / ((3 * k - 2) * (3 * k))
        f = f + t
        g = g + s
        gp = gp + q
        if k >= 2:
            p = p * y3 / (3 * (k - 1) * (3 * k - 1))
            fp = fp + p
    ai = _AI0 * f + _AIP0 * g
    aip = _AI0 * fp + _AIP0 * gp
    return ai, aip


def _truncation_mask(terms: np.ndarray, n_terms) -> np.ndarray:
    """Boolean mask selecting terms up to (excluding) the smallest one."""
    n = terms.shape[0]
    idx = np.arange(n)[:, None]
    if n_terms is not None:
        return np.broadcast_to(idx < n_terms, terms.shape)
    mags = np.abs(terms)
    # first index where the next term no longer decreases
    grow = np.vstack([mags[1:] >= mags[:-1], np.ones((1,) + mags.shape[1:], bool)])
    cut = np.argmax(grow, axis=0)
    return idx <= cut


def _airy_asymptotic(y: np.ndarray, n_terms=None) -> Tuple[np.ndarray, np.ndarray]:
    """Large-``|y|`` expansions of ``Ai`` and ``Ai'``.

    Parameters
    ----------
    y : ndarray
        Nonzero arguments; intended for ``|y|`` of order 5 or larger.
    n_terms : int, optional
        Fixed truncation.  On the positive axis this is the number of terms of
        each series; on the negative axis it is the number of terms in each of
        the cosine and sine sums.  By default every series is truncated just
        after its smallest term.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ax = np.abs(y)
    zeta = (2.0 / 3.0) * ax * np.sqrt(ax)
    u, v = _airy_uv_float(_MAX_ASYMPTOTIC_TERMS)
    s = np.arange(_MAX_ASYMPTOTIC_TERMS + 1)[:, None]
    inv = 1.0 / zeta[None, :]
    powers = inv ** s
    tu = u[:, None] * powers
    tv = v[:, None] * powers
    ai = np.empty_like(y)
    aip = np.empty_like(y)
    q = ax ** 0.25
    pos = y > 0
    if np.any(pos):
        sign = (-1.0) ** s
        cols = np.nonzero(pos)[0]
        mask = _truncation_mask(tu[:, cols], n_terms)
        su = np.sum(np.where(mask, sign * tu[:, cols], 0.0), axis=0)
        sv = np.sum(np.where(mask, sign * tv[:, cols], 0.0), axis=0)
        e = np.exp(-zeta[cols]) / (2.0 * _SQRT_PI)
        ai[cols] = e / q[cols] * su
        aip[cols] = -e * q[cols] * sv
    neg = ~pos
    if np.any(neg):
        cols = np.nonzero(neg)[0]
        even = (s % 2 == 0)
        sgn = np.where((s // 2) % 2 == 0, 1.0, -1.0)
        if n_terms is None:
            mask = _truncation_mask(tu[:, cols], None)
        else:
            mask = np.broadcast_to(s // 2 < n_terms, (s.shape[0], cols.size))
        pu = np.sum(np.where(mask & even, sgn * tu[:, cols], 0.0), axis=0)
        qu = np.sum(np.where(mask & ~even, sgn * tu[:, cols], 0.0), axis=0)
        pv = np.sum(np.where(mask & even, sgn * tv[:, cols], 0.0), axis=0)
        qv = np.sum(np.where(mask & ~even, sgn * tv[:, cols], 0.0), axis=0)
        phase = zeta[cols] - 0.25 * math.pi
        c, sn = np.cos(phase), np.sin(phase)
        ai[cols] = (c * pu + sn * qu) / (_SQRT_PI * q[cols])
        aip[cols] = q[cols] / _SQRT_PI * (sn * pv - c * qv)
    return ai, aip


def _airy_taylor_coeffs(x0, a0, a1, n_terms: int) -> np.ndarray:
    """Taylor coefficients of ``Ai`` about ``x0`` from ``Ai(x0), Ai'(x0)``."""
    x0 = np.asarray(x0, dtype=float)
    c = np.zeros((n_terms,) + np.broadcast(x0, a0).shape)
    c[0] = a0
    c[1] = a1
    c[2] = 0.5 * x0 * c[0]
    for k in range(1, n_terms - 2):
        c[k + 2] = (x0 * c[k] + c[k - 1]) / ((k + 1) * (k + 2))
    return c


def _taylor_eval(c: np.ndarray, h) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate a Taylor polynomial and its derivative by Horner's rule."""
    n = c.shape[0]
    val = c[n - 1] * 1.0
    der = (n - 1) * c[n - 1] * 1.0
    for k in range(n - 2, -1, -1):
        val = val * h + c[k]
        if k >= 1:
            der = der * h + k * c[k]
    return val, der


@lru_cache(maxsize=1)
def _airy_anchors() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Anchor grid ``(y, Ai, Ai')`` covering the bridge regions on both sides."""
    h = AIRY_BRIDGE_STEP
    n_neg = int(round(AIRY_ASYMPTOTIC_RADIUS / h)) + 1
    ys = [0.0]
    vals = [(_AI0, _AIP0)]
    a, b = _AI0, _AIP0
    for j in range(1, n_neg + 1):
        c = _airy_taylor_coeffs(-(j - 1) * h, a, b, _TAYLOR_STEP_TERMS)
        a, b = _taylor_eval(c, -h)
        a, b = float(a), float(b)
        ys.append(-j * h)
        vals.append((a, b))
    top = AIRY_ASYMPTOTIC_RADIUS + h
    a, b = _airy_asymptotic(np.array([top]))
    a, b = float(a[0]), float(b[0])
    pos = [(top, a, b)]
    y = top
    while y > AIRY_SERIES_RADIUS - h + 1e-12:
        c = _airy_taylor_coeffs(y, a, b, _TAYLOR_STEP_TERMS)
        a, b = _taylor_eval(c, -h)
        a, b = float(a), float(b)
        y = y - h
        pos.append((y, a, b))
    grid = sorted([(yy, aa, bb) for yy, (aa, bb) in zip(ys, vals)] + pos)
    arr = np.array(grid)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _airy_bridge(y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate ``Ai, Ai'`` by one Taylor step from the nearest anchor."""
    y = np.asarray(y, dtype=float)
    ya, aa, ba = _airy_anchors()
    idx = np.clip(np.searchsorted(ya, y), 1, ya.size - 1)
    left_closer = (y - ya[idx - 1]) < (ya[idx] - y)
    idx = np.where(left_closer, idx - 1, idx)
    x0 = ya[idx]
    c = _airy_taylor_coeffs(x0, aa[idx], ba[idx], _TAYLOR_EVAL_TERMS)
    return _taylor_eval(c, y - x0)


def airy_pair(y):
    """Return ``(Ai(y), Ai'(y))`` for real ``y``.

    Parameters
    ----------
    y : float or array_like
        Finite real argument(s).

    Returns
    -------
    ai, aip : float or ndarray
    """
    arr, scalar = _as_float_array(y)
    _require_finite(arr, "y")
    flat = arr.ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    ax = np.abs(flat)
    branches = (
        (ax <= AIRY_SERIES_RADIUS, _airy_series),
        (ax >= AIRY_ASYMPTOTIC_RADIUS, _airy_asymptotic),
    )
    done = np.zeros(flat.shape, bool)
    for mask, fn in branches:
        if np.any(mask):
            a, b = fn(flat[mask])
            ai[mask], aip[mask] = a, b
            done |= mask
    rest = ~done
    if np.any(rest):
        ai[rest], aip[rest] = _airy_bridge(flat[rest])
    ai = ai.reshape(arr.shape)
    aip = aip.reshape(arr.shape)
    return _finish(ai, scalar), _finish(aip, scalar)


def airy_ai(y):
    """Airy function ``Ai(y)`` for real ``y``.

    Absolute accuracy is better than ``1e-12`` for ``|y| <= 200``.

    Raises
    ------
    DomainError
        If ``y`` is not finite.

    Examples
    --------
    >>> round(airy_ai(0.0), 10)
    0.3550280539
    """
    return airy_pair(y)[0]


def airy_ai_prime(y):
    """Derivative ``Ai'(y)`` of the Airy function for real ``y``."""
    return airy_pair(y)[1]


def airy_ode_residual(y, h: float = 1e-4):
    """Second-difference residual ``(Ai(y+h) - 2 Ai(y) + Ai(y-h)) / h^2 - y Ai(y)``.

    The truncation error is about ``h^2 y^2 |Ai(y)| / 12``; with the default
    step the residual reflects the accuracy of :func:`airy_ai` itself.
    """
    if not 0 < h <= 0.1:
        raise DomainError("h must lie in (0, 0.1]")
    y, scalar = _as_float_array(y)
    a = airy_ai(y)
    res = (airy_ai(y + h) - 2.0 * a + airy_ai(y - h)) / (h * h) - y * a
    return _finish(res, scalar)


# --------------------------------------------------------------------------
# Bessel functions
# --------------------------------------------------------------------------
def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= -1.0:
        raise DomainError("Bessel order must satisfy alpha > -1")
    return alpha


def _bessel_series(alpha: float, x: np.ndarray) -> np.ndarray:
    """Ascending series ``sum (-1)^k (x/2)^{2k+alpha} / (k! Gamma(k+alpha+1))``."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    with np.errstate(divide="ignore", invalid="ignore"):
        if alpha == 0.0:
            t = np.ones_like(x)
        else:
            t = np.exp(alpha * np.log(half) - math.lgamma(alpha + 1.0))
            t = np.where(x == 0.0, 0.0 if alpha > 0 else np.inf, t)
    at_zero = x == 0.0
    t = np.where(at_zero, 0.0, t)
    q = half * half
    total = t.copy()
    n_terms = 40 + int(2 * np.max(x, initial=0.0))
    for k in range(1, n_terms):
        t = -t * q / (k * (k + alpha))
        total = total + t
    if np.any(at_zero):
        limit = 1.0 if alpha == 0.0 else (0.0 if alpha > 0 else np.inf)
        total = np.where(at_zero, limit, total)
    return total


def _hankel_pair(alpha: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Hankel expansions of ``J_alpha`` and ``J'_alpha`` for large ``x``."""
    x = np.asarray(x, dtype=float)
    a, b = _hankel_ab(alpha, _MAX_ASYMPTOTIC_TERMS)
    s = np.arange(_MAX_ASYMPTOTIC_TERMS + 1)[:, None]
    powers = (1.0 / x[None, :]) ** s
    ta = a[:, None] * powers
    tb = b[:, None] * powers
    mask = _truncation_mask(ta, None)
    if np.all(a[1:] == 0.0):
        mask = np.broadcast_to(s <= 1, ta.shape)
    even = s % 2 == 0
    sgn = np.where((s // 2) % 2 == 0, 1.0, -1.0)
    p = np.sum(np.where(mask & even, sgn * ta, 0.0), axis=0)
    q = np.sum(np.where(mask & ~even, sgn * ta, 0.0), axis=0)
    pb = np.sum(np.where(mask & even, sgn * tb, 0.0), axis=0)
    qb = np.sum(np.where(mask & ~even, sgn * tb, 0.0), axis=0)
    omega = x - (0.5 * alpha + 0.25) * math.pi
    c, sn = np.cos(omega), np.sin(omega)
    amp = np.sqrt(2.0 / (math.pi * x))
    return amp * (p * c - q * sn), -amp * (sn * pb + c * qb)


def _bessel_taylor_coeffs(alpha: float, m, j0, j1, n_terms: int) -> np.ndarray:
    """Taylor coefficients of ``J_alpha`` about ``m > 0`` from ``J, J'`` at ``m``."""
    m = np.asarray(m, dtype=float)
    c = np.zeros((n_terms,) + np.broadcast(m, j0).shape)
    c[0] = j0
    c[1] = j1
    m2 = m * m
    a2 = alpha * alpha
    for k in range(0, n_terms - 2):
        acc = m * (k + 1) * (2 * k + 1) * c[k + 1] + (k * k - a2 + m2) * c[k]
        if k >= 1:
            acc = acc + 2.0 * m * c[k - 1]
        if k >= 2:
            acc = acc + c[k - 2]
        c[k + 2] = -acc / (m2 * (k + 1) * (k + 2))
    return c


def _bessel_limits(alpha: float) -> Tuple[float, float]:
    lo = max(BESSEL_SERIES_LIMIT, abs(alpha))
    hi = max(BESSEL_HANKEL_FLOOR, 2.0 * alpha * alpha, lo + BESSEL_BRIDGE_STEP)
    return lo, hi


@lru_cache(maxsize=64)
def _bessel_anchors(alpha: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo, hi = _bessel_limits(alpha)
    h = BESSEL_BRIDGE_STEP
    n = int(math.ceil((hi - lo) / h)) + 1
    x = lo + n * h
    j, jp = _hankel_pair(alpha, np.array([x]))
    j, jp = float(j[0]), float(jp[0])
    out = [(x, j, jp)]
    for _ in range(n + 1):
        c = _bessel_taylor_coeffs(alpha, x, j, jp, _TAYLOR_STEP_TERMS)
        j, jp = _taylor_eval(c, -h)
        j, jp = float(j), float(jp)
        x -= h
        out.append((x, j, jp))
    arr = np.array(out[::-1])
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _bessel_bridge(alpha: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    xa, ja, jpa = _bessel_anchors(alpha)
    idx = np.clip(np.searchsorted(xa, x), 1, xa.size - 1)
    left_closer = (x - xa[idx - 1]) < (xa[idx] - x)
    idx = np.where(left_closer, idx - 1, idx)
    m = xa[idx]
    c = _bessel_taylor_coeffs(alpha, m, ja[idx], jpa[idx], _TAYLOR_EVAL_TERMS)
    return _taylor_eval(c, x - m)


def _bessel_j_raw(alpha: float, x: np.ndarray) -> np.ndarray:
    lo, hi = _bessel_limits(alpha)
    out = np.empty_like(x)
    small = x <= lo
    large = x >= hi
    mid = ~(small | large)
    if np.any(small):
        out[small] = _bessel_series(alpha, x[small])
    if np.any(large):
        out[large] = _hankel_pair(alpha, x[large])[0]
    if np.any(mid):
        out[mid] = _bessel_bridge(alpha, x[mid])[0]
    return out


def bessel_j(alpha: float, x):
    """Bessel function of the first kind ``J_alpha(x)``.

    Parameters
    ----------
    alpha : float
        Order, ``alpha > -1``.
    x : float or array_like
        Nonnegative argument(s).

    Raises
    ------
    DomainError
        For ``alpha <= -1`` or negative / non-finite ``x``.
    """
    alpha = _check_alpha(alpha)
    arr, scalar = _as_float_array(x)
    _require_finite(arr, "x")
    if np.any(arr < 0):
        raise DomainError("x must be nonnegative")
    out = _bessel_j_raw(alpha, arr.ravel()).reshape(arr.shape)
    return _finish(out, scalar)


def bessel_j_prime(alpha: float, x):
    """Derivative ``J'_alpha(x)`` of the Bessel function.

    Uses ``J'_alpha = (alpha/x) J_alpha - J_{alpha+1}`` away from the Hankel
    region and the differentiated Hankel expansion inside it.

    Raises
    ------
    DomainError
        For ``alpha <= -1``, negative ``x``, or ``x = 0`` with ``alpha < 1``.
    """
    alpha = _check_alpha(alpha)
    arr, scalar = _as_float_array(x)
    _require_finite(arr, "x")
    if np.any(arr < 0):
        raise DomainError("x must be nonnegative")
    flat = arr.ravel()
    if np.any(flat == 0.0):
        if alpha < 1.0:
            raise DomainError("J'_alpha(0) requires alpha >= 1")
    out = np.empty_like(flat)
    _, hi = _bessel_limits(alpha)
    large = flat >= hi
    zero = flat == 0.0
    rest = ~(large | zero)
    if np.any(large):
        out[large] = _hankel_pair(alpha, flat[large])[1]
    if np.any(rest):
        xr = flat[rest]
        out[rest] = alpha / xr * _bessel_j_raw(alpha, xr) - _bessel_j_raw(alpha + 1.0, xr)
    if np.any(zero):
        out[zero] = 0.5 if alpha == 1.0 else 0.0
    return _finish(out.reshape(arr.shape), scalar)


# --------------------------------------------------------------------------
# Weber-Hermite functions
# --------------------------------------------------------------------------
_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)


def _hermite_sweep(n_max: int, x: np.ndarray, keep_all: bool):
    """Run the orthonormal three-term recurrence up to degree ``n_max``.

    Values are carried as ``mantissa * exp(log_scale)`` so that neither the
    Gaussian factor nor the polynomial growth over/underflows midway.
    Returns either the full table ``(n_max+1, ...)`` or the last three degrees.
    """
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.full_like(x, math.pi ** -0.25)
    log_scale = -0.5 * x * x
    table = [cur * np.exp(log_scale)] if keep_all else None
    last = [np.zeros_like(x), np.zeros_like(x), cur * np.exp(log_scale)]
    for ell in range(n_max):
        nxt = math.sqrt(2.0 / (ell + 1)) * x * cur - math.sqrt(ell / (ell + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            prev = np.where(big, prev / _RESCALE, prev)
            cur = np.where(big, cur / _RESCALE, cur)
            log_scale = np.where(big, log_scale + _LOG_RESCALE, log_scale)
        with np.errstate(over="ignore", under="ignore"):
            val = cur * np.exp(np.minimum(log_scale, 700.0))
        if keep_all:
            table.append(val)
        last = [last[1], last[2], val]
    if keep_all:
        return np.array(table)
    return last


def weber_hermite(ell: int, x):
    """Orthonormal Weber-Hermite function ``psi_ell(x)``.

    ``psi_ell(x) = (-1)^ell pi^{-1/4} (2^ell ell!)^{-1/2} e^{x^2/2}
    d^ell/dx^ell e^{-x^2}``, so that ``int psi_ell^2 = 1``.

    Parameters
    ----------
    ell : int
        Degree, ``0 <= ell <= HERMITE_MAX_DEGREE``.
    x : float or array_like

    Raises
    ------
    CapacityError
        If ``ell`` exceeds the recurrence depth cap.
    """
    ell = int(ell)
    if ell < 0:
        raise DomainError("ell must be nonnegative")
    if ell > HERMITE_MAX_DEGREE:
        raise CapacityError(f"ell={ell} exceeds cap {HERMITE_MAX_DEGREE}")
    arr, scalar = _as_float_array(x)
    _require_finite(arr, "x")
    val = _hermite_sweep(ell, arr, keep_all=False)[2]
    return _finish(np.asarray(val), scalar)


def hermite_table(n: int, x) -> np.ndarray:
    """Return ``psi_0(x), ..., psi_{n-1}(x)`` stacked along the first axis."""
    if n < 1:
        raise DomainError("n must be positive")
    if n - 1 > HERMITE_MAX_DEGREE:
        raise CapacityError(f"degree {n - 1} exceeds cap {HERMITE_MAX_DEGREE}")
    return _hermite_sweep(n - 1, np.asarray(x, dtype=float), keep_all=True)


def hermite_triple(n: int, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(psi_{n-1}(x), psi_n(x), psi_{n+1}(x))`` for ``n >= 1``."""
    if n < 1:
        raise DomainError("n must be positive")
    if n + 1 > HERMITE_MAX_DEGREE + 1:
        raise CapacityError(f"degree {n + 1} exceeds cap")
    a, b, c = _hermite_sweep(n + 1, np.asarray(x, dtype=float), keep_all=False)
    return a, b, c
