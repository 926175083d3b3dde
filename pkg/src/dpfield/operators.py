"""Nystrom discretization of kernel operators restricted to intervals.

A kernel ``K`` restricted to a union of intervals ``I`` is represented by the
symmetric matrix ``M_ij = sqrt(w_i) K(x_i, x_j) sqrt(w_j)`` on a panel
Gauss-Legendre grid.  Traces of powers of ``M`` converge to the traces of the
integral operator ``A = K chi_I``, from which the counting statistics follow:

* ``E nu = Tr A`` and ``Var nu = Tr A - Tr A^2``;
* ``log E exp(t nu) = sum_k (-1)^{k-1} Tr(A^k) (e^t - 1)^k / k``;
* ``E prod_j z_j^{nu_j} = det(I + sum_j (z_j - 1) A chi_{I_j})``.

Panels are laid out uniformly in a family-specific coordinate in which the
kernel oscillates with period about one (the unfolded coordinate, or the
identity for kernels already at unit density), so a fixed number of nodes per
unit guarantees a fixed number of nodes per oscillation.

The dense matrix is built lazily.  The first two traces are accumulated
blockwise, so mean and variance remain available for grids that are too
large to hold in memory.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CapacityError, DomainError, ResolutionError, SpectrumError
from .kernels import Coordinates, Family, KernelSpec, NodeEvaluator, unfold

#: Default quadrature nodes per unit length of the panel coordinate.
DEFAULT_NODES_PER_UNIT = 12
#: Resolutions below this floor are rejected.
MIN_NODES_PER_UNIT = 6
#: Tolerance for eigenvalues outside [0, 1] that are clipped rather than rejected.
SPECTRUM_TOL = 1e-8
#: Upper integration limit substituted for +inf with the Airy kernel.
AIRY_TAIL_CUTOFF = 12.0
#: Largest grid for which a dense matrix (and hence eigenvalues) is formed.
DENSE_MAX_NODES = 10000
#: Row-block size for blockwise accumulation.
BLOCK_ROWS = 512
#: Largest cumulant order accepted by :func:`counting_cumulants`.
MAX_CUMULANT_ORDER = 12
#: Largest power accepted by :func:`trace_power`.
MAX_TRACE_POWER = 32
#: Number of geometric refinement levels towards ``y = 0`` for the Bessel kernel.
BESSEL_GRADING_LEVELS = 24


@dataclass(frozen=True)
class IntervalFamily:
    """Ordered collection of intervals ``(lo, hi)``.

    Parameters
    ----------
    intervals : sequence of (float, float)
        Endpoints with ``lo < hi``.  ``hi = inf`` is accepted (and truncated
        at ``AIRY_TAIL_CUTOFF``) for the Airy kernel only.
    disjoint : bool
        When true, intervals must not overlap (touching endpoints are fine).
    """

    intervals: Tuple[Tuple[float, float], ...]
    disjoint: bool = True

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if not ivs:
            raise DomainError("interval family is empty")
        for lo, hi in ivs:
            if math.isnan(lo) or math.isnan(hi) or not lo < hi:
                raise DomainError(f"invalid interval ({lo}, {hi})")
        if self.disjoint:
            srt = sorted(ivs)
            for (a0, a1), (b0, b1) in zip(srt, srt[1:]):
                if b0 < a1:
                    raise DomainError(f"intervals ({a0}, {a1}) and ({b0}, {b1}) overlap")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def single(cls, lo: float, hi: float) -> "IntervalFamily":
        return cls(((lo, hi),))

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __getitem__(self, i):
        return self.intervals[i]


def _as_family(intervals) -> IntervalFamily:
    if isinstance(intervals, IntervalFamily):
        return intervals
    ivs = list(intervals)
    if len(ivs) == 2 and all(np.isscalar(v) for v in ivs):
        return IntervalFamily.single(*ivs)
    return IntervalFamily(tuple(tuple(iv) for iv in ivs))


# --------------------------------------------------------------------------
# Panel coordinates
# --------------------------------------------------------------------------
_PI2 = math.pi ** 2
_PI3 = math.pi ** 3


def _airy_s(y):
    """Panel coordinate for the Airy kernel: slope ``max(sqrt|y| / pi, 1)``."""
    y = np.asarray(y, dtype=float)
    far = -_PI2 - (2.0 / (3.0 * math.pi)) * (np.abs(y) ** 1.5 - _PI3)
    return np.where(y >= -_PI2, y, far)


def _airy_s_inv(s):
    s = np.asarray(s, dtype=float)
    t = np.maximum(-(s + _PI2) * 1.5 * math.pi + _PI3, 0.0)
    return np.where(s >= -_PI2, s, -(t ** (2.0 / 3.0)))


def _panel_maps(spec: KernelSpec):
    fam = spec.family
    if fam is Family.AIRY:
        return _airy_s, _airy_s_inv
    if fam is Family.BESSEL:
        return (lambda y: np.sqrt(np.asarray(y, float)) / math.pi,
                lambda s: (math.pi * np.asarray(s, float)) ** 2)
    if fam is Family.HERMITE:
        n = spec.n
        return (lambda x: n * np.asarray(x, float), lambda s: np.asarray(s, float) / n)
    return (lambda x: np.asarray(x, float), lambda s: np.asarray(s, float))


@lru_cache(maxsize=32)
def _gauss_legendre(p: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(p)


def _panel_grid(spec: KernelSpec, lo: float, hi: float, npu: float):
    fwd, inv = _panel_maps(spec)
    s0, s1 = float(fwd(lo)), float(fwd(hi))
    n_pan = max(1, int(math.ceil((s1 - s0) * (1 - 1e-12))))
    breaks = inv(np.linspace(s0, s1, n_pan + 1))
    breaks[0], breaks[-1] = lo, hi
    if spec.family is Family.BESSEL and lo == 0.0:
        levels = BESSEL_GRADING_LEVELS * (2 if spec.alpha < 0 else 1)
        first = breaks[1] * 0.5 ** np.arange(levels, 0, -1)
        breaks = np.concatenate([[0.0], first, breaks[1:]])
    p = int(math.ceil(npu))
    t, w = _gauss_legendre(p)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * t[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


# --------------------------------------------------------------------------
# Operator
# --------------------------------------------------------------------------
class DiscretizedOperator:
    """Symmetric Nystrom matrix of a kernel restricted to intervals.

    The object is immutable after construction; the dense matrix, spectrum
    and trace caches are filled lazily on first use.

    Attributes
    ----------
    nodes : ndarray
        Quadrature nodes in raw kernel coordinates.
    weights : ndarray
        Positive quadrature weights.
    interval_tags : ndarray of int
        Index of the interval each node belongs to.
    spec : KernelSpec or None
        Kernel the operator was built from (``None`` for explicit matrices).
    """

    def __init__(
        self,
        nodes: np.ndarray,
        weights: np.ndarray,
        interval_tags: np.ndarray,
        spec: Optional[KernelSpec] = None,
        intervals: Optional[IntervalFamily] = None,
        matrix: Optional[np.ndarray] = None,
        nodes_per_unit: Optional[float] = None,
    ):
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.interval_tags = np.asarray(interval_tags, dtype=int)
        self.spec = spec
        self.intervals = intervals
        self.nodes_per_unit = nodes_per_unit
        if self.nodes.shape != self.weights.shape or self.nodes.shape != self.interval_tags.shape:
            raise DomainError("nodes, weights and tags must have equal length")
        self._sqrt_w = np.sqrt(self.weights)
        self._explicit = None
        if matrix is not None:
            m = np.array(matrix, dtype=float)
            if m.shape != (self.size, self.size):
                raise DomainError("matrix shape does not match the node count")
            scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
            if m.size and np.max(np.abs(m - m.T)) > 1e-13 * scale:
                raise DomainError("operator matrix must be symmetric")
            self._explicit = 0.5 * (m + m.T)
            self._explicit.setflags(write=False)
        elif spec is None:
            raise DomainError("either a kernel spec or a matrix is required")

    # -- construction helpers -------------------------------------------
    @classmethod
    def from_matrix(cls, matrix, interval_tags=None) -> "DiscretizedOperator":
        """Wrap an explicit symmetric matrix as an operator (unit weights)."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("matrix must be square")
        n = m.shape[0]
        tags = np.zeros(n, int) if interval_tags is None else np.asarray(interval_tags, int)
        return cls(np.arange(n, dtype=float), np.ones(n), tags, matrix=m)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def n_intervals(self) -> int:
        return int(self.interval_tags.max()) + 1 if self.size else 0

    @cached_property
    def _evaluator(self) -> NodeEvaluator:
        return NodeEvaluator(self.spec, self.nodes)

    def block(self, rows, cols) -> np.ndarray:
        """Sub-block ``M[rows][:, cols]`` without forming the full matrix."""
        if self._explicit is not None:
            return self._explicit[np.ix_(np.arange(self.size)[rows], np.arange(self.size)[cols])]
        kb = self._evaluator.block(rows, cols)
        return self._sqrt_w[rows][:, None] * kb * self._sqrt_w[cols][None, :]

    @cached_property
    def diagonal(self) -> np.ndarray:
        """Diagonal ``w_i K(x_i, x_i)``."""
        if self._explicit is not None:
            return np.diag(self._explicit).copy()
        return self.weights * self._evaluator.diagonal()

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense symmetric matrix (read-only)."""
        if self._explicit is not None:
            return self._explicit
        if self.size > DENSE_MAX_NODES:
            raise CapacityError(
                f"{self.size} nodes exceed the dense limit {DENSE_MAX_NODES}; "
                "only blockwise traces (k <= 2) are available"
            )
        idx = np.arange(self.size)
        m = self.block(idx, idx)
        m = 0.5 * (m + m.T)
        np.fill_diagonal(m, self.diagonal)
        m.setflags(write=False)
        return m

    def iter_row_blocks(self, block_rows: int = BLOCK_ROWS) -> Iterator[Tuple[slice, np.ndarray]]:
        """Yield ``(rows, M[rows, rows.start:])`` covering the upper triangle."""
        n = self.size
        for r0 in range(0, n, block_rows):
            r1 = min(n, r0 + block_rows)
            yield slice(r0, r1), self.block(slice(r0, r1), slice(r0, n))

    @cached_property
    def tagged_square_sums(self) -> np.ndarray:
        """Matrix ``S[a, b] = sum_{i in a, j in b} M_ij^2`` over interval tags."""
        nt = self.n_intervals
        onehot = np.zeros((self.size, nt))
        onehot[np.arange(self.size), self.interval_tags] = 1.0
        out = np.zeros((nt, nt))
        diag = self.diagonal
        for rows, blk in self.iter_row_blocks():
            r0, r1 = rows.start, rows.stop
            sq = blk * blk
            width = r1 - r0
            sq[np.arange(width), np.arange(width)] = diag[r0:r1] ** 2
            square = sq[:, :width]
            out += onehot[r0:r1].T @ square @ onehot[r0:r1]
            rest = sq[:, width:]
            if rest.size:
                cross = onehot[r0:r1].T @ rest @ onehot[r1:]
                out += cross + cross.T
        return out

    @cached_property
    def _eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        vals, vecs = np.linalg.eigh(self.matrix)
        return check_spectrum(vals), vecs

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order, clipped to [0, 1] (see :func:`check_spectrum`)."""
        return self._eigh[0]

    def eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Clipped eigenvalues and orthonormal eigenvectors."""
        return self._eigh

    # -- serialization ------------------------------------------------------
    def to_json(self) -> str:
        """JSON envelope with nodes, weights, tags, kernel spec and row-major matrix."""
        doc = {
            "format": "dpfield.operator/1",
            "kernel": None if self.spec is None else self.spec.to_dict(),
            "intervals": None if self.intervals is None else [list(iv) for iv in self.intervals],
            "nodes_per_unit": self.nodes_per_unit,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "interval_tags": self.interval_tags.tolist(),
            "shape": [self.size, self.size],
            "matrix": self.matrix.ravel().tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "DiscretizedOperator":
        doc = json.loads(text)
        if doc.get("format") != "dpfield.operator/1":
            raise DomainError("not a dpfield operator envelope")
        n = doc["shape"][0]
        spec = None if doc["kernel"] is None else KernelSpec.from_dict(doc["kernel"])
        ivs = None if doc["intervals"] is None else IntervalFamily(tuple(map(tuple, doc["intervals"])))
        return cls(
            np.array(doc["nodes"]), np.array(doc["weights"]), np.array(doc["interval_tags"]),
            spec=spec, intervals=ivs, nodes_per_unit=doc.get("nodes_per_unit"),
            matrix=np.array(doc["matrix"]).reshape(n, n),
        )

    def __repr__(self) -> str:
        name = "matrix" if self.spec is None else self.spec.label()
        return f"DiscretizedOperator({name}, size={self.size}, intervals={self.n_intervals})"


def check_spectrum(vals: np.ndarray, tol: float = SPECTRUM_TOL) -> np.ndarray:
    """Clip eigenvalues to [0, 1], rejecting excursions larger than ``tol``.

    Raises
    ------
    SpectrumError
        If any eigenvalue lies below ``-tol`` or above ``1 + tol``.
    """
    vals = np.asarray(vals, dtype=float)
    if vals.size and (vals.min() < -tol or vals.max() > 1.0 + tol):
        raise SpectrumError(
            f"spectrum [{vals.min():.3e}, {vals.max():.3e}] leaves [0, 1] beyond tolerance {tol}"
        )
    return np.clip(vals, 0.0, 1.0)


def discretize(
    kernel: KernelSpec,
    intervals,
    nodes_per_unit: float = DEFAULT_NODES_PER_UNIT,
) -> DiscretizedOperator:
    """Discretize ``K chi_I`` on a panel Gauss-Legendre grid.

    Parameters
    ----------
    kernel : KernelSpec
        Kernel to restrict.  For unfolded Airy/Bessel specs the intervals are
        given in unfolded coordinates; nodes are always stored raw.
    intervals : IntervalFamily or sequence of (lo, hi)
    nodes_per_unit : float
        Gauss-Legendre nodes per unit of the panel coordinate.

    Raises
    ------
    ResolutionError
        If ``nodes_per_unit < MIN_NODES_PER_UNIT``.
    DomainError
        For unbounded or out-of-domain intervals.

    Examples
    --------
    >>> op = discretize(KernelSpec("sine"), (0.0, 10.0), 10)
    >>> round(float(op.diagonal.sum()), 8)
    10.0
    """
    if not nodes_per_unit >= MIN_NODES_PER_UNIT:
        raise ResolutionError(
            f"nodes_per_unit={nodes_per_unit} is below the oscillation floor {MIN_NODES_PER_UNIT}"
        )
    fam = _as_family(intervals)
    spec = kernel
    ivs = list(fam.intervals)
    if spec.coordinates is Coordinates.UNFOLDED:
        u = unfold(spec)
        ivs = [(float(u.inverse(lo)), float(u.inverse(hi))) for lo, hi in ivs]
    raw = spec.raw
    nodes, weights, tags = [], [], []
    for j, (lo, hi) in enumerate(ivs):
        if math.isinf(lo):
            raise DomainError("intervals must be bounded below")
        if math.isinf(hi):
            if raw.family is not Family.AIRY:
                raise DomainError("only the Airy kernel admits hi = +inf")
            hi = max(AIRY_TAIL_CUTOFF, lo + 1.0)
        if raw.family is Family.BESSEL and lo < 0:
            raise DomainError("Bessel intervals must lie in [0, inf)")
        x, w = _panel_grid(raw, lo, hi, nodes_per_unit)
        nodes.append(x)
        weights.append(w)
        tags.append(np.full(x.size, j))
    return DiscretizedOperator(
        np.concatenate(nodes), np.concatenate(weights), np.concatenate(tags),
        spec=raw, intervals=fam, nodes_per_unit=float(nodes_per_unit),
    )


# --------------------------------------------------------------------------
# Traces and cumulants
# --------------------------------------------------------------------------
def trace_power(op: DiscretizedOperator, k: int, method: str = "auto") -> float:
    """``Tr(M^k)`` of the discretized operator.

    Parameters
    ----------
    k : int
        Power, ``1 <= k <= 32``.
    method : {"auto", "eig", "matmul"}
        ``k = 1, 2`` are always computed from the diagonal and blockwise
        Frobenius sums under ``auto``.  Higher powers use eigenvalue powers
        (``eig``) or repeated symmetric multiplication (``matmul``).
    """
    k = int(k)
    if not 1 <= k <= MAX_TRACE_POWER:
        raise DomainError(f"k must lie in [1, {MAX_TRACE_POWER}]")
    if method not in ("auto", "eig", "matmul"):
        raise DomainError(f"unknown method {method!r}")
    if method == "auto" and k == 1:
        return float(np.sum(op.diagonal))
    if method == "auto" and k == 2:
        return float(np.sum(op.tagged_square_sums))
    if method == "matmul":
        m = op.matrix
        result = None
        base = m
        e = k
        while e:
            if e & 1:
                result = base if result is None else result @ base
            e >>= 1
            if e:
                base = base @ base
        return float(np.trace(result))
    vals = op.eigenvalues
    return float(np.sum(vals ** k))


@lru_cache(maxsize=None)
def _composition_weights(ell_max: int) -> Tuple[Tuple[Fraction, ...], ...]:
    """Rows ``ell``: coefficients of ``T_k`` in ``C_ell`` (Stirling numbers S(ell, k)).

    Obtained by expanding ``sum_k T_k (e^t - 1)^k / k!`` as a power series in
    ``t`` with exact rational arithmetic and reading off ``ell! [t^ell]``.
    """
    base = [Fraction(0)] + [Fraction(1, math.factorial(j)) for j in range(1, ell_max + 1)]
    power = [Fraction(1)] + [Fraction(0)] * ell_max
    rows = [[Fraction(0)] * (ell_max + 1) for _ in range(ell_max + 1)]
    for k in range(1, ell_max + 1):
        new = [Fraction(0)] * (ell_max + 1)
        for i, a in enumerate(power):
            if a == 0:
                continue
            for j in range(1, ell_max + 1 - i):
                new[i + j] += a * base[j]
        power = new
        for ell in range(1, ell_max + 1):
            rows[ell][k] = power[ell] * math.factorial(ell) / math.factorial(k)
    return tuple(tuple(r) for r in rows)


@dataclass(frozen=True)
class CumulantReport:
    """Counting-statistics cumulants of one operator.

    Attributes
    ----------
    traces : ndarray
        ``Tr(A^k)`` for ``k = 1..ell_max`` (index 0 holds ``k = 1``).
    cumulants : ndarray
        ``C_ell`` for ``ell = 1..ell_max``.
    mean, variance : float
        ``C_1`` and ``C_2``.
    """

    traces: np.ndarray
    cumulants: np.ndarray
    mean: float
    variance: float

    def trace_gaps(self) -> np.ndarray:
        """``Tr(A - A^ell)`` for ``ell = 1..ell_max``."""
        return self.traces[0] - self.traces

    def trace_chain_holds(self, slack: float = 1e-9) -> bool:
        """Check ``0 <= Tr(A - A^ell) <= (ell - 1) Tr(A - A^2)`` for every ``ell``."""
        gaps = self.trace_gaps()
        ell = np.arange(1, gaps.size + 1)
        v = self.traces[0] - self.traces[1] if gaps.size > 1 else 0.0
        return bool(np.all(gaps >= -slack) and np.all(gaps <= (ell - 1) * v + slack))


def counting_cumulants(op: DiscretizedOperator, ell_max: int = 6) -> CumulantReport:
    """Cumulants ``C_1..C_ell_max`` of the particle count.

    ``T_k = (-1)^{k-1} (k-1)! Tr(A^k)`` and
    ``sum_ell C_ell t^ell / ell! = sum_k T_k (e^t - 1)^k / k!``.
    """
    ell_max = int(ell_max)
    if not 1 <= ell_max <= MAX_CUMULANT_ORDER:
        raise CapacityError(f"ell_max must lie in [1, {MAX_CUMULANT_ORDER}]")
    traces = [trace_power(op, 1)]
    if ell_max >= 2:
        traces.append(trace_power(op, 2))
    for k in range(3, ell_max + 1):
        traces.append(trace_power(op, k, "eig"))
    traces = np.array(traces)
    t = np.array([(-1) ** (k - 1) * math.factorial(k - 1) * traces[k - 1] for k in range(1, ell_max + 1)])
    w = _composition_weights(ell_max)
    cum = np.array([sum(float(w[ell][k]) * t[k - 1] for k in range(1, ell + 1)) for ell in range(1, ell_max + 1)])
    variance = float(traces[0] - traces[1]) if ell_max >= 2 else float("nan")
    if ell_max >= 2:
        cum[1] = variance
    return CumulantReport(traces, cum, float(traces[0]), variance)


def variance_of_count(op: DiscretizedOperator) -> float:
    """``Var nu = Tr A - Tr A^2``."""
    return trace_power(op, 1) - trace_power(op, 2)


def covariance_matrix(op: DiscretizedOperator) -> np.ndarray:
    """Covariance of the counts in the tagged intervals.

    ``Cov(nu_a, nu_b) = delta_ab Tr(chi_a A) - Tr(chi_a A chi_b A)``.
    """
    nt = op.n_intervals
    tr = np.bincount(op.interval_tags, weights=op.diagonal, minlength=nt)
    return np.diag(tr) - op.tagged_square_sums


def joint_cumulant_11(
    kernel: KernelSpec,
    I: Tuple[float, float],
    J: Tuple[float, float],
    nodes_per_unit: float = DEFAULT_NODES_PER_UNIT,
) -> float:
    """``Cov(#I, #J) = -Tr(chi_I K chi_J K)`` for disjoint intervals ``I, J``.

    Raises
    ------
    DomainError
        If the intervals overlap.
    """
    op = discretize(kernel, IntervalFamily((tuple(I), tuple(J))), nodes_per_unit)
    return float(covariance_matrix(op)[0, 1])


# --------------------------------------------------------------------------
# Generating function
# --------------------------------------------------------------------------
def fredholm_generating(op: DiscretizedOperator, z) -> Union[float, complex]:
    """Fredholm determinant ``det(I + sum_j (z_j - 1) M chi_j)``.

    Parameters
    ----------
    z : scalar or sequence
        One value per interval, or a single value applied to all of them.
        Complex values are allowed.

    Returns
    -------
    float or complex
        ``E prod_j z_j^{nu_j}``; exactly 0 for a singular bracket.
    """
    zv = np.asarray(z)
    if zv.ndim == 0:
        zv = np.full(op.n_intervals, zv.item())
    if zv.shape != (op.n_intervals,):
        raise DomainError("z needs one value per interval")
    if not np.all(np.isfinite(zv)):
        raise DomainError("z must be finite")
    d = zv[op.interval_tags] - 1.0
    if np.all(d == 0):
        return 1.0
    if np.all(d == d[0]):
        vals = op.eigenvalues
        val = np.prod(1.0 + d[0] * vals)
    else:
        a = np.eye(op.size, dtype=d.dtype) + op.matrix * d[None, :]
        sign, logdet = np.linalg.slogdet(a)
        val = 0.0 if sign == 0 else sign * np.exp(logdet)
    if np.iscomplexobj(val):
        return complex(val)
    return float(val)


def count_distribution(op: DiscretizedOperator, n_points: int = 64, interval: Optional[int] = None) -> np.ndarray:
    """Distribution of the particle count by Fourier inversion.

    The generating function is evaluated at the ``n_points`` roots of unity
    and inverted with an FFT.  ``n_points`` is enlarged automatically (to a
    power of two) when the count could exceed it, which would alias.

    Parameters
    ----------
    interval : int, optional
        Restrict to the count in one tagged interval; default is the total.

    Returns
    -------
    ndarray
        ``P(nu = k)`` for ``k = 0..n_points-1``.
    """
    if interval is None:
        mean = float(np.sum(op.diagonal))
    else:
        mean = float(np.sum(op.diagonal[op.interval_tags == interval]))
    need = int(mean + 12.0 * math.sqrt(max(mean, 1.0)) + 16)
    n = int(n_points)
    if n < need:
        n = 1 << (need - 1).bit_length()
    w = np.exp(2j * math.pi * np.arange(n) / n)
    if interval is None:
        vals = op.eigenvalues
        phi = np.array([np.prod(1.0 + (wk - 1.0) * vals) for wk in w])
    else:
        phi = np.empty(n, complex)
        for i, wk in enumerate(w):
            z = np.ones(op.n_intervals, complex)
            z[interval] = wk
            phi[i] = fredholm_generating(op, z)
    p = np.fft.fft(phi).real / n
    p[np.abs(p) < 1e-15] = 0.0
    return np.clip(p, 0.0, None)
