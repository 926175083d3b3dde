"""Correlation kernels of the determinantal point fields and their unfoldings.

Every kernel here is a real symmetric function ``K(x, y)`` acting on the
line (or half line).  Scalar helpers such as :func:`airy_kernel` accept
broadcastable arrays; :func:`kernel_matrix` evaluates a kernel on the outer
product of two node vectors while computing the special functions only once
per node.

Integrable kernels of the form ``(f(x) g(y) - g(x) f(y)) / (x - y)`` lose
digits when ``x`` and ``y`` nearly coincide.  For the Airy and Bessel kernels
such pairs are evaluated from a Taylor expansion about the midpoint, built
from the ODE satisfied by ``f``; see :func:`_wronskian_taylor`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import specfun
from .errors import CapacityError, DomainError

#: Airy pairs with ``|y1 - y2| * max(1, sqrt|m|) < AIRY_NEAR`` use the Taylor form.
AIRY_NEAR = 2e-2
#: Bessel pairs with ``|x1 - x2| < BESSEL_NEAR * min(1, m)`` (``x = sqrt(y)``) use it.
BESSEL_NEAR = 2e-2
#: Finite Hermite kernel switches from the explicit sum to Christoffel-Darboux above this n.
HERMITE_SUM_MAX_N = 50
#: Largest n accepted by the finite Hermite kernel.
HERMITE_MAX_N = 2000
#: Hermite pairs closer than this (in the sqrt(2n)-scaled variable) use the explicit sum.
HERMITE_NEAR = 1e-4
_NEAR_TERMS = 16


class Family(str, Enum):
    """Kernel families known to the package."""

    SINE = "sine"
    AIRY = "airy"
    BESSEL = "bessel"
    EVEN_SINE = "even_sine"
    ODD_SINE = "odd_sine"
    HERMITE = "hermite"
    SO_EVEN = "so_even"
    SO_ODD = "so_odd"
    SP = "sp"
    UNITARY = "unitary"


COMPACT_FAMILIES = (Family.SO_EVEN, Family.SO_ODD, Family.SP, Family.UNITARY)
FINITE_FAMILIES = COMPACT_FAMILIES + (Family.HERMITE,)


class Coordinates(str, Enum):
    RAW = "raw"
    UNFOLDED = "unfolded"


@dataclass(frozen=True)
class KernelSpec:
    """Symbolic description of a correlation kernel.

    Parameters
    ----------
    family : Family or str
        Kernel family.
    alpha : float, optional
        Bessel order; required for ``Family.BESSEL`` and must exceed -1.
    n : int, optional
        Matrix size (Hermite, U(n)) or rank parameter (SO(2n), SO(2n+1), Sp(n)).
    coordinates : Coordinates or str
        ``raw`` or ``unfolded``; unfolding applies to Airy and Bessel only.

    Examples
    --------
    >>> KernelSpec("bessel", alpha=0.5)
    KernelSpec(family=<Family.BESSEL: 'bessel'>, alpha=0.5, n=None, coordinates=<Coordinates.RAW: 'raw'>)
    """

    family: Family
    alpha: Optional[float] = None
    n: Optional[int] = None
    coordinates: Coordinates = Coordinates.RAW

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "coordinates", Coordinates(self.coordinates))
        if self.family is Family.BESSEL:
            if self.alpha is None or not self.alpha > -1:
                raise DomainError("Bessel kernel requires alpha > -1")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise DomainError(f"alpha is not a parameter of {self.family.value}")
        if self.family in FINITE_FAMILIES:
            if self.n is None or int(self.n) < 1:
                raise DomainError(f"{self.family.value} requires n >= 1")
            object.__setattr__(self, "n", int(self.n))
        elif self.n is not None:
            raise DomainError(f"n is not a parameter of {self.family.value}")
        if self.coordinates is Coordinates.UNFOLDED and self.family not in (
            Family.AIRY,
            Family.BESSEL,
        ):
            raise DomainError("only Airy and Bessel kernels have an unfolded form")
        if self.family is Family.HERMITE and self.n > HERMITE_MAX_N:
            raise CapacityError(f"Hermite kernel limited to n <= {HERMITE_MAX_N}")

    @property
    def raw(self) -> "KernelSpec":
        """The same kernel in raw coordinates."""
        return KernelSpec(self.family, self.alpha, self.n, Coordinates.RAW)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "alpha": self.alpha,
            "n": self.n,
            "coordinates": self.coordinates.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["family"], d.get("alpha"), d.get("n"), d.get("coordinates", "raw"))

    def label(self) -> str:
        parts = [self.family.value]
        if self.alpha is not None:
            parts.append(f"alpha={self.alpha:g}")
        if self.n is not None:
            parts.append(f"n={self.n}")
        return ",".join(parts)

    def __call__(self, x, y):
        """Evaluate the kernel elementwise on broadcastable arrays."""
        return evaluate(self, x, y)


# --------------------------------------------------------------------------
# Near-diagonal machinery
# --------------------------------------------------------------------------
def _wronskian_taylor(p: np.ndarray, q: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Return ``N(h) / (2h)`` for ``N(h) = f(m+h) g(m-h) - g(m+h) f(m-h)``.

    ``p`` and ``q`` hold Taylor coefficients (first axis) of ``f`` and ``g``
    about the midpoint ``m``.  The even coefficients of ``N`` vanish
    identically, so the quotient is formed without cancellation.
    """
    n = p.shape[0]
    out = np.zeros(np.broadcast(p[0], h).shape)
    hp = np.ones_like(out)
    for deg in range(1, n, 2):
        e = np.zeros_like(out)
        for j in range(deg + 1):
            k = deg - j
            if j >= n or k >= n:
                continue
            sign = -1.0 if k % 2 else 1.0
            e = e + sign * (p[j] * q[k] - q[j] * p[k])
        out = out + e * hp
        hp = hp * h * h
    return 0.5 * out


def _airy_near(y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    m = 0.5 * (y1 + y2)
    h = 0.5 * (y1 - y2)
    a, b = specfun.airy_pair(m)
    c = specfun._airy_taylor_coeffs(m, a, b, _NEAR_TERMS + 1)
    k = np.arange(_NEAR_TERMS)[:, None]
    d = (k + 1) * c[1:]
    return _wronskian_taylor(c[:-1], d, h)


def _bessel_near(alpha: float, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Bessel kernel for nearby points in ``x = sqrt(y)``.

    With ``f = J_alpha`` and ``g = x J'_alpha``, the kernel equals
    ``N / (2 (x1^2 - x2^2)) = N/(2h) / (4 m)`` in terms of the midpoint ``m``.
    """
    m = 0.5 * (x1 + x2)
    h = 0.5 * (x1 - x2)
    j = specfun.bessel_j(alpha, m)
    jp = specfun.bessel_j_prime(alpha, m)
    c = specfun._bessel_taylor_coeffs(alpha, m, j, jp, _NEAR_TERMS + 1)
    k = np.arange(_NEAR_TERMS)[:, None]
    d = m * (k + 1) * c[1:] + k * c[:-1]
    return _wronskian_taylor(c[:-1], d, h) / (4.0 * m)


# --------------------------------------------------------------------------
# Kernel formulas on precomputed node values
# --------------------------------------------------------------------------
def _airy_from_values(y1, a1, b1, y2, a2, b2) -> np.ndarray:
    y1, y2 = np.broadcast_arrays(y1, y2)
    diff = y1 - y2
    scale = np.maximum(1.0, np.sqrt(np.abs(0.5 * (y1 + y2))))
    near = np.abs(diff) * scale < AIRY_NEAR
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (a1 * b2 - b1 * a2) / diff
    if np.any(near):
        eq = near & (diff == 0)
        close = near & ~eq
        if np.any(eq):
            a_eq = np.broadcast_to(a1, out.shape)[eq]
            b_eq = np.broadcast_to(b1, out.shape)[eq]
            out[eq] = b_eq * b_eq - y1[eq] * a_eq * a_eq
        if np.any(close):
            out[close] = _airy_near(y1[close], y2[close])
    return out


def _bessel_from_values(alpha, x1, j1, g1, x2, j2, g2) -> np.ndarray:
    """Bessel kernel from ``x = sqrt(y)``, ``J_alpha(x)`` and ``x J'_alpha(x)``.

    Off the diagonal ``K = (J(x1) g(x2) - g(x1) J(x2)) / (2 (x1^2 - x2^2))``.
    """
    x1, x2 = np.broadcast_arrays(x1, x2)
    num = j1 * g2 - g1 * j2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / (2.0 * (x1 * x1 - x2 * x2))
    m = 0.5 * (x1 + x2)
    near = np.abs(x1 - x2) < BESSEL_NEAR * np.minimum(1.0, m)
    if np.any(near):
        eq = near & (x1 == x2)
        close = near & ~eq
        if np.any(eq):
            out[eq] = _bessel_density_x(alpha, x1[eq])
        if np.any(close):
            out[close] = _bessel_near(alpha, x1[close], x2[close])
    zero = (x1 == 0) & (x2 == 0)
    if np.any(zero):
        out[zero] = _bessel_density_x(alpha, np.zeros(int(zero.sum())))
    return out


def _bessel_density_x(alpha: float, x: np.ndarray) -> np.ndarray:
    """Bessel one-level density at ``y = x^2``.

    ``rho = (J_alpha^2 - J_{alpha+1} J_{alpha-1}) / 4``, rewritten with the
    three-term recurrence so that ``J_{alpha-1}`` (undefined for alpha <= 0
    in our domain) is never needed:
    ``rho = (J_alpha^2 + J_{alpha+1}^2 - (2 alpha / x) J_alpha J_{alpha+1}) / 4``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        ja = specfun.bessel_j(alpha, xp)
        jb = specfun.bessel_j(alpha + 1.0, xp)
        out[pos] = 0.25 * (ja * ja + jb * jb - 2.0 * alpha / xp * ja * jb)
    if np.any(~pos):
        # y -> 0 limit: 0 for alpha > 0, 1/4 for alpha = 0, infinite below.
        out[~pos] = 0.25 if alpha == 0 else (0.0 if alpha > 0 else np.inf)
    return out


def _bessel_node_values(alpha: float, x: np.ndarray):
    """Return ``J_alpha(x)`` and ``x J'_alpha(x) = alpha J_alpha - x J_{alpha+1}``."""
    j = specfun.bessel_j(alpha, x)
    jn = specfun.bessel_j(alpha + 1.0, x)
    return j, alpha * j - x * jn


def _sinc(d):
    return np.sinc(d)


def _dirichlet(big_n: int, d) -> np.ndarray:
    """``sin(pi d) / (big_n sin(pi d / big_n))`` with removable zeros filled."""
    d = np.asarray(d, dtype=float)
    den = big_n * np.sin(np.pi * d / big_n)
    num = np.sin(np.pi * d)
    r = d / big_n
    j = np.rint(r)
    sing = np.abs(r - j) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    if np.any(sing):
        # near d = j * big_n expand both sines to first order in e = d - j*big_n
        jj = j[sing] if j.ndim else j
        e = (d - j * big_n)[sing] if d.ndim else d - j * big_n
        sign = (-1.0) ** (np.abs(jj) * (big_n - 1) % 2)
        val = sign * np.sinc(e) / np.sinc(e / big_n)
        if out.ndim:
            out[sing] = val
        else:
            out = val
    return out


# --------------------------------------------------------------------------
# Public scalar kernels
# --------------------------------------------------------------------------
def sine_kernel(x, y):
    """Sine kernel ``sin(pi (x - y)) / (pi (x - y))``; equals 1 on the diagonal."""
    return _out(_sinc(np.subtract(x, y)), x, y)


def even_odd_sine_kernel(sign: int, x, y):
    """Even (``sign=+1``) or odd (``sign=-1``) restriction of the sine kernel.

    ``K(x, y) = sinc(x - y) + sign * sinc(x + y)`` with ``sinc(t) = sin(pi t)/(pi t)``.
    """
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    return _out(_sinc(np.subtract(x, y)) + sign * _sinc(np.add(x, y)), x, y)


def airy_kernel(y1, y2):
    """Airy kernel ``(Ai(y1) Ai'(y2) - Ai'(y1) Ai(y2)) / (y1 - y2)``.

    On the diagonal the limit ``Ai'(y)^2 - y Ai(y)^2`` is used, and close
    pairs are evaluated from a Taylor expansion about their midpoint.
    """
    y1a, y2a = np.broadcast_arrays(np.asarray(y1, float), np.asarray(y2, float))
    shape = y1a.shape
    y1a, y2a = y1a.ravel(), y2a.ravel()
    a1, b1 = specfun.airy_pair(y1a)
    a2, b2 = specfun.airy_pair(y2a)
    out = _airy_from_values(y1a, a1, b1, y2a, a2, b2).reshape(shape)
    return _out(out, y1, y2)


def airy_density(y):
    """Airy one-level density ``Ai'(y)^2 - y Ai(y)^2``."""
    a, b = specfun.airy_pair(y)
    return b * b - np.asarray(y) * a * a if np.ndim(y) else b * b - y * a * a


def airy_density_ode_residual(y, h: float = 1e-3):
    """Residual of ``rho''' + 2 rho - 4 y rho'`` by central differences.

    Parameters
    ----------
    y : float or array_like
    h : float
        Difference step, ``0 < h <= 0.1``.
    """
    if not 0 < h <= 0.1:
        raise DomainError("h must lie in (0, 0.1]")
    y = np.asarray(y, dtype=float)
    r = lambda t: airy_density(t)  # noqa: E731
    d1 = (r(y + h) - r(y - h)) / (2 * h)
    d3 = (r(y + 2 * h) - 2 * r(y + h) + 2 * r(y - h) - r(y - 2 * h)) / (2 * h ** 3)
    res = d3 + 2 * r(y) - 4 * y * d1
    return float(res) if res.ndim == 0 else res


def bessel_kernel(alpha: float, y1, y2):
    """Bessel kernel of order ``alpha`` at ``y1, y2 >= 0``.

    ``K(y1, y2) = (J(x1) x2 J'(x2) - x1 J'(x1) J(x2)) / (2 (y1 - y2))`` with
    ``x = sqrt(y)`` and ``J = J_alpha``; the diagonal is the one-level density.

    Raises
    ------
    DomainError
        For negative coordinates or ``alpha <= -1``.
    """
    y1a, y2a = np.broadcast_arrays(np.asarray(y1, float), np.asarray(y2, float))
    if np.any(y1a < 0) or np.any(y2a < 0):
        raise DomainError("Bessel kernel coordinates must be nonnegative")
    alpha = specfun._check_alpha(alpha)
    shape = y1a.shape
    x1, x2 = np.sqrt(y1a.ravel()), np.sqrt(y2a.ravel())
    j1, g1 = _bessel_node_values(alpha, x1)
    j2, g2 = _bessel_node_values(alpha, x2)
    out = _bessel_from_values(alpha, x1, j1, g1, x2, j2, g2).reshape(shape)
    return _out(out, y1, y2)


def bessel_density(alpha: float, y):
    """Bessel one-level density at ``y >= 0``."""
    ya = np.asarray(y, dtype=float)
    if np.any(ya < 0):
        raise DomainError("y must be nonnegative")
    out = _bessel_density_x(specfun._check_alpha(alpha), np.sqrt(ya).ravel()).reshape(ya.shape)
    return float(out) if out.ndim == 0 else out


def _hermite_cd(n: int, X, tx, Y, ty) -> np.ndarray:
    """Christoffel-Darboux sum ``sum_{l<n} psi_l(X_i) psi_l(Y_j)`` (outer product).

    ``tx`` and ``ty`` are the triples ``(psi_{n-1}, psi_n, psi_{n+1})`` at
    ``X`` and ``Y``.  Pairs closer than ``HERMITE_NEAR`` fall back to the
    explicit sum; exactly coincident pairs use the closed diagonal form
    ``n psi_n^2 - sqrt(n (n+1)) psi_{n-1} psi_{n+1}``.
    """
    pm_x, pn_x, pp_x = tx
    pm_y, pn_y, _ = ty
    diff = X[:, None] - Y[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = math.sqrt(n / 2.0) * (pn_x[:, None] * pm_y[None, :] - pm_x[:, None] * pn_y[None, :]) / diff
    near = np.abs(diff) < HERMITE_NEAR
    if np.any(near):
        ii, jj = np.nonzero(near)
        eq = X[ii] == Y[jj]
        if np.any(eq):
            i, j = ii[eq], jj[eq]
            out[i, j] = n * pn_x[i] ** 2 - math.sqrt(n * (n + 1.0)) * pm_x[i] * pp_x[i]
        if np.any(~eq):
            i, j = ii[~eq], jj[~eq]
            out[i, j] = np.sum(specfun.hermite_table(n, X[i]) * specfun.hermite_table(n, Y[j]), axis=0)
    return out


class _HermiteNodes:
    """Per-node Hermite data for the finite GUE kernel."""

    def __init__(self, n: int, x: np.ndarray):
        self.n = n
        self.scale = math.sqrt(2.0 * n)
        self.X = self.scale * np.asarray(x, dtype=float)
        if n <= HERMITE_SUM_MAX_N:
            self.table = specfun.hermite_table(n, self.X)
        else:
            self.triple = specfun.hermite_triple(n, self.X)

    def block(self, rows, cols) -> np.ndarray:
        if self.n <= HERMITE_SUM_MAX_N:
            return self.scale * (self.table[:, rows].T @ self.table[:, cols])
        tx = tuple(t[rows] for t in self.triple)
        ty = tuple(t[cols] for t in self.triple)
        return self.scale * _hermite_cd(self.n, self.X[rows], tx, self.X[cols], ty)

    def diagonal(self) -> np.ndarray:
        if self.n <= HERMITE_SUM_MAX_N:
            return self.scale * np.sum(self.table ** 2, axis=0)
        pm, pn, pp = self.triple
        n = self.n
        return self.scale * (n * pn ** 2 - math.sqrt(n * (n + 1.0)) * pm * pp)


def _hermite_outer(n: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h = _HermiteNodes(n, np.concatenate([x, y]))
    return h.block(np.arange(x.size), np.arange(x.size, x.size + y.size))


def hermite_finite_kernel(n: int, x1, x2):
    """Finite-n GUE kernel ``sqrt(2n) sum_{l<n} psi_l(sqrt(2n) x1) psi_l(sqrt(2n) x2)``.

    The Christoffel-Darboux two-term form is used for ``n > 50``.

    Raises
    ------
    CapacityError
        For ``n > 2000``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    if n > HERMITE_MAX_N:
        raise CapacityError(f"Hermite kernel limited to n <= {HERMITE_MAX_N}")
    x1a, x2a = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    flat1, flat2 = x1a.ravel(), x2a.ravel()
    h = _HermiteNodes(n, np.concatenate([flat1, flat2]))
    m = flat1.size
    out = np.empty(m)
    for i0 in range(0, m, 256):
        idx = np.arange(i0, min(i0 + 256, m))
        out[idx] = np.diag(h.block(idx, idx + m))
    return _out(out.reshape(x1a.shape), x1, x2)


def compact_group_kernel(family, n: int, x, y):
    """Finite-n eigenangle kernel of a classical compact group, rescaled.

    Coordinates are scaled so that the mean spacing is one:

    ==========  =================================  ==============
    family      kernel                             coordinate
    ==========  =================================  ==============
    so_even     S_{2n-1}(x-y) + S_{2n-1}(x+y)      (2n-1) th/2pi
    so_odd      S_{2n}(x-y) - S_{2n}(x+y)          n th/pi
    sp          S_{2n+1}(x-y) - S_{2n+1}(x+y)      (2n+1) th/2pi
    unitary     S_n(x-y)                           n th/2pi
    ==========  =================================  ==============

    where ``S_N(d) = sin(pi d) / (N sin(pi d / N))``.
    """
    fam = Family(family)
    n = int(n)
    if fam not in COMPACT_FAMILIES:
        raise DomainError(f"{fam.value} is not a compact-group family")
    if n < 1:
        raise DomainError("n must be positive")
    d_minus = np.subtract(x, y)
    if fam is Family.UNITARY:
        return _out(_dirichlet(n, d_minus), x, y)
    d_plus = np.add(x, y)
    big_n, sign = {
        Family.SO_EVEN: (2 * n - 1, 1.0),
        Family.SO_ODD: (2 * n, -1.0),
        Family.SP: (2 * n + 1, -1.0),
    }[fam]
    return _out(_dirichlet(big_n, d_minus) + sign * _dirichlet(big_n, d_plus), x, y)


def compact_scale(family, n: int) -> float:
    """Factor ``c`` such that the rescaled coordinate is ``x = c * theta``."""
    fam = Family(family)
    return {
        Family.SO_EVEN: (2 * n - 1) / (2 * math.pi),
        Family.SO_ODD: n / math.pi,
        Family.SP: (2 * n + 1) / (2 * math.pi),
        Family.UNITARY: n / (2 * math.pi),
    }[fam]


def _out(value, *args):
    value = np.asarray(value, dtype=float)
    if value.ndim == 0 and all(np.ndim(a) == 0 for a in args):
        return float(value)
    return value


# --------------------------------------------------------------------------
# Unfolding
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class UnfoldingMap:
    """Change of variables making the limiting one-level density equal to one.

    Attributes
    ----------
    forward : callable
        Raw coordinate ``y`` to unfolded coordinate ``z``.
    inverse : callable
        ``z`` to ``y``.
    jacobian : callable
        ``dy/dz`` as a function of ``z``.
    jacobian_factor : callable
        ``w(y1, y2)`` such that ``Q(z1, z2) = w(y1, y2) K(y1, y2)``; equals
        ``sqrt(dy/dz (z1) * dy/dz (z2))``.
    """

    forward: Callable
    inverse: Callable
    jacobian: Callable
    jacobian_factor: Callable
    family: Family = field(default=Family.AIRY)


def _airy_forward(y):
    y = np.asarray(y, dtype=float)
    return (2.0 / (3.0 * math.pi)) * y * np.sqrt(np.abs(y))


def _airy_inverse(z):
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.abs(1.5 * math.pi * z) ** (2.0 / 3.0)


def _airy_jacobian(z):
    y = _airy_inverse(z)
    with np.errstate(divide="ignore"):
        return math.pi / np.sqrt(np.abs(y))


def _airy_factor(y1, y2):
    with np.errstate(divide="ignore"):
        return math.pi * np.abs(y1) ** -0.25 * np.abs(y2) ** -0.25


def _bessel_forward(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("Bessel coordinates must be nonnegative")
    return np.sqrt(y) / math.pi


def _bessel_inverse(z):
    z = np.asarray(z, dtype=float)
    return (math.pi * z) ** 2


def _bessel_jacobian(z):
    return 2.0 * math.pi ** 2 * np.asarray(z, dtype=float)


def _bessel_factor(y1, y2):
    return 2.0 * math.pi * np.asarray(y1, float) ** 0.25 * np.asarray(y2, float) ** 0.25


def unfold(spec: KernelSpec) -> UnfoldingMap:
    """Return the unfolding map of an Airy or Bessel kernel.

    Airy: ``z = (2/(3 pi)) y |y|^{1/2}``, weight ``pi |y1|^{-1/4} |y2|^{-1/4}``.
    Bessel: ``z = sqrt(y) / pi``, weight ``2 pi y1^{1/4} y2^{1/4}``.
    """
    fam = spec.family
    if fam is Family.AIRY:
        return UnfoldingMap(_airy_forward, _airy_inverse, _airy_jacobian, _airy_factor, fam)
    if fam is Family.BESSEL:
        return UnfoldingMap(_bessel_forward, _bessel_inverse, _bessel_jacobian, _bessel_factor, fam)
    raise DomainError(f"no unfolding defined for {fam.value}")


def unfolded_kernel(spec: KernelSpec, z1, z2):
    """Kernel ``Q(z1, z2)`` in unfolded coordinates."""
    u = unfold(spec)
    y1, y2 = u.inverse(z1), u.inverse(z2)
    return _out(u.jacobian_factor(y1, y2) * evaluate(spec.raw, y1, y2), z1, z2)


def unfolded_density(spec: KernelSpec, z):
    """One-level density in unfolded coordinates, ``q_1(z) = Q(z, z)``."""
    return unfolded_kernel(spec, z, z)


# --------------------------------------------------------------------------
# Generic evaluation
# --------------------------------------------------------------------------
def evaluate(spec: KernelSpec, x, y):
    """Elementwise kernel evaluation for broadcastable ``x`` and ``y``."""
    if spec.coordinates is Coordinates.UNFOLDED:
        return unfolded_kernel(spec, x, y)
    fam = spec.family
    if fam is Family.SINE:
        return sine_kernel(x, y)
    if fam is Family.EVEN_SINE:
        return even_odd_sine_kernel(1, x, y)
    if fam is Family.ODD_SINE:
        return even_odd_sine_kernel(-1, x, y)
    if fam is Family.AIRY:
        return airy_kernel(x, y)
    if fam is Family.BESSEL:
        return bessel_kernel(spec.alpha, x, y)
    if fam is Family.HERMITE:
        return hermite_finite_kernel(spec.n, x, y)
    return compact_group_kernel(fam, spec.n, x, y)


class NodeEvaluator:
    """Kernel evaluation on a fixed set of raw-coordinate nodes.

    Special-function values are computed once per node so that arbitrary
    sub-blocks of the kernel matrix cost only elementary arithmetic.
    """

    def __init__(self, spec: KernelSpec, nodes: np.ndarray):
        self.spec = spec.raw
        self.nodes = np.asarray(nodes, dtype=float)
        fam = self.spec.family
        if fam is Family.AIRY:
            self._a, self._b = specfun.airy_pair(self.nodes)
        elif fam is Family.BESSEL:
            if np.any(self.nodes < 0):
                raise DomainError("Bessel kernel coordinates must be nonnegative")
            self._x = np.sqrt(self.nodes)
            self._j, self._g = _bessel_node_values(self.spec.alpha, self._x)
        elif fam is Family.HERMITE:
            self._herm = _HermiteNodes(self.spec.n, self.nodes)

    def block(self, rows, cols) -> np.ndarray:
        """Kernel matrix ``K(nodes[rows], nodes[cols])``."""
        fam = self.spec.family
        y1, y2 = self.nodes[rows], self.nodes[cols]
        if fam is Family.AIRY:
            return _airy_from_values(
                y1[:, None], self._a[rows][:, None], self._b[rows][:, None],
                y2[None, :], self._a[cols][None, :], self._b[cols][None, :],
            )
        if fam is Family.BESSEL:
            return _bessel_from_values(
                self.spec.alpha,
                self._x[rows][:, None], self._j[rows][:, None], self._g[rows][:, None],
                self._x[cols][None, :], self._j[cols][None, :], self._g[cols][None, :],
            )
        if fam is Family.HERMITE:
            return self._herm.block(rows, cols)
        return np.asarray(evaluate(self.spec, y1[:, None], y2[None, :]), dtype=float)

    def diagonal(self) -> np.ndarray:
        fam = self.spec.family
        if fam is Family.AIRY:
            return self._b ** 2 - self.nodes * self._a ** 2
        if fam is Family.BESSEL:
            return _bessel_density_x(self.spec.alpha, self._x)
        if fam is Family.HERMITE:
            return self._herm.diagonal()
        return np.asarray(evaluate(self.spec, self.nodes, self.nodes), dtype=float)


def kernel_matrix(spec: KernelSpec, x, y=None) -> np.ndarray:
    """Kernel matrix ``K(x_i, y_j)`` in raw coordinates.

    When ``y`` is omitted the square matrix on ``x`` is returned and
    special-function values are shared between rows and columns.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if y is None:
        ev = NodeEvaluator(spec, x)
        idx = np.arange(x.size)
        return ev.block(idx, idx)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ev = NodeEvaluator(spec, np.concatenate([x, y]))
    return ev.block(np.arange(x.size), np.arange(x.size, x.size + y.size))
