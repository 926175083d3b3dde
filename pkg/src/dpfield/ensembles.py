"""Random-matrix and Haar samplers, rescalings and exact finite DPP sampling.

Conventions
-----------
* GUE: Hermitian ``H`` with independent entries of variance ``(1 + delta_ij) / (8n)``
  (density proportional to ``exp(-2n Tr H^2)``); the spectrum fills ``[-1, 1]``.
* LUE: ``H = A A^*`` with ``A`` an ``n x (n + alpha)`` complex Gaussian matrix of
  entry variance ``1/n`` (density ``exp(-n Tr A A^*) det(A A^*)^alpha``).  The
  spectrum of ``H`` fills ``[0, 4]``; samples report ``lambda / 4`` so that the
  values fill ``[0, 1]`` with limiting density ``(2/pi) x^{-1/2} (1-x)^{1/2}``.
* Compact groups: eigenangles in ``[0, 2 pi)`` for U(n); for SO(2n), SO(2n+1)
  and Sp(n) the ``n`` angles in ``[0, pi]`` of the conjugate pairs.

Seeds are plain integers; replica ``i`` of a run with master seed ``s`` uses
:func:`replica_seed` so results do not depend on scheduling.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import CapacityError, ConfigError, DomainError, SpectrumError
from .kernels import compact_scale
from .operators import SPECTRUM_TOL, DiscretizedOperator, IntervalFamily, check_spectrum

GUE_MAX_N = 4000
COMPACT_MAX_N = 2000
LUE_MAX_N = 4000


class Ensemble(str, Enum):
    GUE = "gue"
    LUE = "lue"
    UNITARY = "unitary"
    SO_EVEN = "so_even"
    SO_ODD = "so_odd"
    SP = "sp"


COMPACT_GROUPS = (Ensemble.UNITARY, Ensemble.SO_EVEN, Ensemble.SO_ODD, Ensemble.SP)


def replica_seed(master: int, index: int) -> np.random.SeedSequence:
    """Seed sequence of replica ``index`` under master seed ``master``."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _seed_value(seed) -> Optional[int]:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, np.uint64)[0])
    return None


@dataclass(frozen=True)
class EigenangleSample:
    """One draw from a matrix ensemble.

    Attributes
    ----------
    ensemble : Ensemble
    n : int
        Size parameter (matrix size for GUE/LUE/U(n); rank for SO/Sp).
    values : ndarray
        Sorted eigenvalues (GUE, LUE) or eigenangles.
    seed : int or None
        Seed that produced the draw (when known).
    alpha : float, optional
        LUE exponent.
    fixed_one : bool
        True for SO(2n+1), whose eigenvalue ``+1`` is excluded from ``values``.
    """

    ensemble: Ensemble
    n: int
    values: np.ndarray
    seed: Optional[int] = None
    alpha: Optional[float] = None
    fixed_one: bool = False


# --------------------------------------------------------------------------
# Gaussian and Laguerre ensembles
# --------------------------------------------------------------------------
def gue_matrix(n: int, seed) -> np.ndarray:
    """Hermitian GUE matrix with entry variances ``(1 + delta_ij) / (8n)``."""
    rng = _rng(seed)
    sd = 1.0 / math.sqrt(4.0 * n)
    g = rng.normal(scale=sd, size=(n, n)) + 1j * rng.normal(scale=sd, size=(n, n))
    return 0.5 * (g + g.conj().T)


def gue_tridiagonal(n: int, seed):
    """Tridiagonal model with the GUE eigenvalue law of :func:`gue_matrix`.

    Householder reduction of a GUE matrix gives independent ``N(0, 1/(4n))``
    diagonal entries and off-diagonal moduli ``chi_{2k} / (2 sqrt(2n))``,
    ``k = n-1, ..., 1``.

    Returns
    -------
    (diag, offdiag) : tuple of ndarray
    """
    rng = _rng(seed)
    d = rng.normal(scale=1.0 / (2.0 * math.sqrt(n)), size=n)
    e = _chi(rng, 2.0 * np.arange(n - 1, 0, -1)) / (2.0 * math.sqrt(2.0 * n)) if n > 1 else np.zeros(0)
    return d, e


def sample_gue(n: int, seed, method: str = "dense", lower: Optional[float] = None) -> EigenangleSample:
    """Sorted GUE eigenvalues; the spectrum concentrates on ``[-1, 1]``.

    Parameters
    ----------
    method : {"dense", "tridiagonal"}
        ``dense`` diagonalizes a full Hermitian matrix; ``tridiagonal`` uses
        the equivalent chi-distributed tridiagonal model (much faster).
    lower : float, optional
        Only eigenvalues above ``lower`` are returned (tridiagonal route
        computes just those).

    Raises
    ------
    CapacityError
        For ``n > 4000``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    if n > GUE_MAX_N:
        raise CapacityError(f"GUE sampling limited to n <= {GUE_MAX_N}")
    if method == "dense":
        vals = np.linalg.eigvalsh(gue_matrix(n, seed))
        if lower is not None:
            vals = vals[vals > lower]
    elif method == "tridiagonal":
        d, e = gue_tridiagonal(n, seed)
        if n == 1:
            vals = d.copy()
            if lower is not None:
                vals = vals[vals > lower]
        elif lower is None:
            vals = eigvalsh_tridiagonal(d, e)
        else:
            vals = eigvalsh_tridiagonal(d, e, select="v", select_range=(lower, np.inf))
    else:
        raise ConfigError(f"unknown GUE method {method!r}")
    return EigenangleSample(Ensemble.GUE, n, np.sort(vals), _seed_value(seed))


def _chi(rng: np.random.Generator, dof) -> np.ndarray:
    return np.sqrt(rng.chisquare(dof))


def sample_lue(n: int, alpha: float, seed, method: str = "auto") -> EigenangleSample:
    """Sorted LUE eigenvalues, scaled to ``[0, 1]``.

    Parameters
    ----------
    alpha : float
        Exponent ``alpha > -1``.
    method : {"auto", "ginibre", "bidiagonal"}
        ``ginibre`` forms ``A A^*`` from a rectangular complex Gaussian matrix
        (requires integer ``alpha >= 0``); ``bidiagonal`` uses the
        chi-distributed bidiagonal model and accepts any ``alpha > -1``.
        ``auto`` picks ``ginibre`` for integer ``alpha`` and ``bidiagonal``
        otherwise.
    """
    n = int(n)
    alpha = float(alpha)
    if n < 1:
        raise DomainError("n must be positive")
    if n > LUE_MAX_N:
        raise CapacityError(f"LUE sampling limited to n <= {LUE_MAX_N}")
    if not alpha > -1:
        raise DomainError("alpha must exceed -1")
    integer = alpha >= 0 and float(alpha).is_integer()
    if method == "auto":
        method = "ginibre" if integer else "bidiagonal"
    rng = _rng(seed)
    if method == "ginibre":
        if not integer:
            raise ConfigError("the Ginibre route needs a nonnegative integer alpha")
        m = n + int(alpha)
        sd = 1.0 / math.sqrt(2.0 * n)
        a = rng.normal(scale=sd, size=(n, m)) + 1j * rng.normal(scale=sd, size=(n, m))
        # squared singular values avoid forming A A^* explicitly
        vals = np.linalg.svd(a, compute_uv=False) ** 2
    elif method == "bidiagonal":
        # B has chi_{2(n+alpha-i)} on the diagonal and chi_{2(n-1-i)} below it;
        # B B^T has the beta = 2 Laguerre law with weight exp(-lambda / 2).
        a_par = n + alpha
        diag = _chi(rng, 2.0 * (a_par - np.arange(n)))
        sub = _chi(rng, 2.0 * np.arange(n - 1, 0, -1)) if n > 1 else np.zeros(0)
        bmat = np.diag(diag)
        if n > 1:
            bmat[np.arange(1, n), np.arange(n - 1)] = sub
        vals = np.linalg.svd(bmat, compute_uv=False) ** 2 / (2.0 * n)
    else:
        raise ConfigError(f"unknown LUE method {method!r}")
    vals = np.sort(vals) / 4.0
    return EigenangleSample(Ensemble.LUE, n, vals, _seed_value(seed), alpha=alpha)


# --------------------------------------------------------------------------
# Haar measure on compact groups
# --------------------------------------------------------------------------
def haar_unitary(n: int, seed) -> np.ndarray:
    """Haar-distributed ``U(n)`` matrix (QR of a Ginibre matrix, phase-corrected)."""
    rng = _rng(seed)
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def haar_orthogonal(n: int, seed, special: bool = True) -> np.ndarray:
    """Haar-distributed ``O(n)`` or, with ``special``, ``SO(n)`` matrix."""
    rng = _rng(seed)
    z = rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    q = q * np.sign(np.diagonal(r))[None, :]
    if special and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _symplectic_form(n: int) -> np.ndarray:
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def haar_symplectic(n: int, seed) -> np.ndarray:
    """Haar-distributed unitary symplectic ``Sp(n) = U(2n) cap Sp(2n, C)`` matrix.

    Columns are produced by quaternionic Gram-Schmidt: the columns ``v_k`` and
    ``J conj(v_k)`` are orthonormalised in the order
    ``v_1, J conj(v_1), v_2, J conj(v_2), ...``.  Because ``J conj(.)`` maps
    the orthogonal complement of a quaternionic subspace onto itself, the
    result satisfies ``U^T J U = J`` (up to the column ordering, undone below).
    """
    rng = _rng(seed)
    jf = _symplectic_form(n)
    z = (rng.normal(size=(2 * n, n)) + 1j * rng.normal(size=(2 * n, n))) / math.sqrt(2.0)
    basis = np.zeros((2 * n, 0), complex)
    vs, ws = [], []
    for k in range(n):
        v = z[:, k].copy()
        for _ in range(2):
            v -= basis @ (basis.conj().T @ v)
        v /= np.linalg.norm(v)
        w = jf @ v.conj()
        vs.append(v)
        ws.append(w)
        basis = np.column_stack([basis, v, w])
    u = np.empty((2 * n, 2 * n), complex)
    u[:, :n] = np.array(vs).T
    u[:, n:] = -np.array(ws).T
    return u


def _cayley_angles(q: np.ndarray) -> np.ndarray:
    """Eigenangles of a unitary matrix in ``[0, 2 pi)``.

    Uses the Cayley transform ``H = i (I - Q)(I + Q)^{-1}``, which is Hermitian
    with eigenvalues ``tan(theta / 2)``, so a Hermitian eigensolver applies.
    Falls back to a general eigensolver when ``I + Q`` is ill conditioned.
    """
    n = q.shape[0]
    eye = np.eye(n)
    try:
        h = 1j * np.linalg.solve((eye + q).T, (eye - q).T).T
        h = 0.5 * (h + h.conj().T)
        mu = np.linalg.eigvalsh(h)
        if np.all(np.isfinite(mu)) and np.max(np.abs(mu)) < 1e6:
            theta = 2.0 * np.arctan(mu)
            return np.sort(np.mod(theta, 2.0 * math.pi))
    except np.linalg.LinAlgError:
        pass
    ev = np.linalg.eigvals(q)
    return np.sort(np.mod(np.angle(ev), 2.0 * math.pi))


def _paired_angles(theta: np.ndarray, n_pairs: int) -> np.ndarray:
    """Fold angles of a real-structured spectrum into ``[0, pi]`` (one per pair)."""
    folded = np.where(theta > math.pi, 2.0 * math.pi - theta, theta)
    folded = np.sort(folded)
    # each pair appears twice; keep every other value
    return folded[0::2][:n_pairs] if folded.size == 2 * n_pairs else folded


def compact_matrix(group, n: int, seed) -> np.ndarray:
    """Haar matrix of ``U(n)``, ``SO(2n)``, ``SO(2n+1)`` or ``Sp(n)``."""
    g = Ensemble(group)
    if g is Ensemble.UNITARY:
        return haar_unitary(n, seed)
    if g is Ensemble.SO_EVEN:
        return haar_orthogonal(2 * n, seed)
    if g is Ensemble.SO_ODD:
        return haar_orthogonal(2 * n + 1, seed)
    if g is Ensemble.SP:
        return haar_symplectic(n, seed)
    raise DomainError(f"{g.value} is not a compact group")


def sample_compact(group, n: int, seed) -> EigenangleSample:
    """Eigenangles of a Haar-distributed matrix of a classical compact group.

    For ``unitary`` the ``n`` angles in ``[0, 2 pi)`` are returned.  For
    ``so_even`` (SO(2n)), ``so_odd`` (SO(2n+1)) and ``sp`` (Sp(n)) the
    eigenvalues come in conjugate pairs and the ``n`` angles in ``[0, pi]``
    are returned; the fixed eigenvalue ``+1`` of SO(2n+1) is dropped.
    """
    g = Ensemble(group)
    n = int(n)
    if g not in COMPACT_GROUPS:
        raise DomainError(f"{g.value} is not a compact group")
    if n < 1:
        raise DomainError("n must be positive")
    if n > COMPACT_MAX_N:
        raise CapacityError(f"compact-group sampling limited to n <= {COMPACT_MAX_N}")
    q = compact_matrix(g, n, seed)
    if g is Ensemble.UNITARY:
        vals = _cayley_angles(q)
        return EigenangleSample(g, n, vals, _seed_value(seed))
    theta = _cayley_angles(q.astype(complex))
    if g is Ensemble.SO_ODD:
        # drop the fixed eigenvalue +1 (angle closest to 0 modulo 2 pi)
        k = int(np.argmin(np.minimum(theta, 2.0 * math.pi - theta)))
        theta = np.delete(theta, k)
        return EigenangleSample(g, n, _paired_angles(theta, n), _seed_value(seed), fixed_one=True)
    return EigenangleSample(g, n, _paired_angles(theta, n), _seed_value(seed))


# --------------------------------------------------------------------------
# Rescaling
# --------------------------------------------------------------------------
class Regime(str, Enum):
    SOFT_EDGE = "soft_edge"
    HARD_EDGE = "hard_edge"
    BULK_COMPACT = "bulk_compact"


#: Candidate hard-edge maps on the ``[0, 4]`` spectral scale: ``y = c(n) lambda``.
HARD_EDGE_MAPS = {"4n": lambda n: 4.0 * n, "4n2": lambda n: 4.0 * n * n}
#: Map selected by the Bessel-density check (see ``experiments.hard_edge_scale_check``).
DEFAULT_HARD_EDGE_MAP = "4n2"


@dataclass(frozen=True)
class RescaleSpec:
    """Rescaling of a sample to the coordinates of a limiting kernel.

    ``soft_edge``: ``y = 2 n^{2/3} (lambda - 1)`` (GUE near ``lambda = 1``).
    ``hard_edge``: ``y = c(n) lambda_{[0,4]}`` with ``c(n) = 4n^2`` by default
    (``"4n"`` is the alternative candidate).  LUE samples store
    ``lambda_{[0,4]} / 4``, which is undone here.
    ``bulk_compact``: ``x = c theta`` with the group-specific ``c`` of
    :func:`dpfield.kernels.compact_scale`.
    """

    regime: Regime
    hard_edge_map: str = DEFAULT_HARD_EDGE_MAP

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.hard_edge_map not in HARD_EDGE_MAPS:
            raise ConfigError(f"unknown hard-edge map {self.hard_edge_map!r}")


def rescale(sample: EigenangleSample, spec: RescaleSpec) -> np.ndarray:
    """Map a sample to the rescaled coordinates of ``spec`` (order preserved).

    Raises
    ------
    ConfigError
        If the regime does not apply to the sample's ensemble.
    """
    reg = spec.regime
    n = sample.n
    v = np.asarray(sample.values, dtype=float)
    if reg is Regime.SOFT_EDGE:
        if sample.ensemble is not Ensemble.GUE:
            raise ConfigError("soft-edge rescaling applies to GUE samples")
        return 2.0 * n ** (2.0 / 3.0) * (v - 1.0)
    if reg is Regime.HARD_EDGE:
        if sample.ensemble is not Ensemble.LUE:
            raise ConfigError("hard-edge rescaling applies to LUE samples")
        return HARD_EDGE_MAPS[spec.hard_edge_map](n) * 4.0 * v
    if sample.ensemble not in COMPACT_GROUPS:
        raise ConfigError("bulk rescaling applies to compact-group samples")
    return compact_scale(sample.ensemble.value, n) * v


def count_in_intervals(points, intervals) -> np.ndarray:
    """Number of points in each half-open interval ``(lo, hi]``."""
    pts = np.sort(np.asarray(points, dtype=float).ravel())
    if isinstance(intervals, IntervalFamily):
        ivs = intervals.intervals
    else:
        ivs = [tuple(iv) for iv in intervals]
    lo = np.array([iv[0] for iv in ivs], dtype=float)
    hi = np.array([iv[1] for iv in ivs], dtype=float)
    return (np.searchsorted(pts, hi, side="right") - np.searchsorted(pts, lo, side="right")).astype(int)


# --------------------------------------------------------------------------
# Exact sampling of a finite DPP
# --------------------------------------------------------------------------
def sample_dpp(op: DiscretizedOperator, seed) -> np.ndarray:
    """Exact sample of the determinantal process defined by an operator matrix.

    Spectral algorithm: each eigenvector is kept independently with
    probability equal to its eigenvalue; the resulting projection DPP is then
    sampled point by point, each time choosing a node with probability
    proportional to the squared row norm and projecting the basis onto the
    complement of that node.

    Returns
    -------
    ndarray of int
        Sorted node indices.

    Raises
    ------
    SpectrumError
        If the spectrum leaves [0, 1] beyond tolerance.
    """
    rng = _rng(seed)
    vals, vecs = op.eigh()
    keep = rng.random(vals.size) < vals
    v = vecs[:, keep]
    return _sample_projection(v, rng)


def _sample_projection(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    chosen = []
    v = v.copy()
    while v.shape[1] > 0:
        p = np.sum(v * v, axis=1)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        i = int(rng.choice(p.size, p=p))
        chosen.append(i)
        # eliminate node i: pivot on the column with the largest entry in row i
        j = int(np.argmax(np.abs(v[i])))
        piv = v[:, j].copy()
        v = np.delete(v, j, axis=1)
        if v.shape[1] == 0:
            break
        v -= np.outer(piv, v[i] / piv[i])
        v, _ = np.linalg.qr(v)
    return np.sort(np.array(chosen, dtype=int))


def spectral_dpp_sampler(op: DiscretizedOperator):
    """Return a fast closure ``draw(rng) -> indices`` reusing one eigendecomposition."""
    vals, vecs = op.eigh()

    def draw(rng: np.random.Generator) -> np.ndarray:
        keep = rng.random(vals.size) < vals
        return _sample_projection(vecs[:, keep], rng)

    return draw


# --------------------------------------------------------------------------
# CSV streaming
# --------------------------------------------------------------------------
def samples_to_csv(samples: Iterable[EigenangleSample], stream) -> None:
    """Write one CSV row per draw: ``seed, ensemble, n, value_0, value_1, ...``."""
    w = csv.writer(stream, lineterminator="\n")
    rows = list(samples)
    width = max((s.values.size for s in rows), default=0)
    w.writerow(["seed", "ensemble", "n"] + [f"v{i}" for i in range(width)])
    for s in rows:
        w.writerow([s.seed, s.ensemble.value, s.n] + [repr(float(x)) for x in s.values])


def samples_from_csv(stream) -> List[EigenangleSample]:
    """Inverse of :func:`samples_to_csv`."""
    r = csv.reader(stream)
    next(r)
    out = []
    for row in r:
        vals = np.array([float(x) for x in row[3:] if x != ""])
        seed = int(row[0]) if row[0] not in ("", "None") else None
        out.append(EigenangleSample(Ensemble(row[1]), int(row[2]), vals, seed))
    return out
