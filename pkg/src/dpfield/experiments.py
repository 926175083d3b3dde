"""Experiment drivers: operator scans, Monte Carlo CLT runs and result files.

Two families of experiments live here.

*Operator scans* are deterministic: a kernel is discretized on a schedule of
intervals and the exact counting statistics (mean ``Tr A``, variance
``Tr A - Tr A^2``, covariances) are computed from the Nystrom matrix.

*Monte Carlo runs* draw random matrices and count eigenvalues in windows.
Replica ``i`` always uses ``replica_seed(seed, i)``, and results are reduced
in replica order, so output does not depend on the number of worker threads.

Every driver returns an :class:`ExperimentResult`, which can be written to a
CSV file plus a JSON sidecar with :func:`write_result`.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .ensembles import (
    COMPACT_GROUPS,
    DEFAULT_HARD_EDGE_MAP,
    HARD_EDGE_MAPS,
    Ensemble,
    replica_seed,
    sample_compact,
    sample_gue,
    sample_lue,
)
from .errors import ConfigError
from .kernels import Family, KernelSpec, compact_scale
from .operators import (
    DEFAULT_NODES_PER_UNIT,
    IntervalFamily,
    counting_cumulants,
    covariance_matrix,
    discretize,
    fredholm_generating,
    trace_power,
)
from .stats import (
    Fit,
    correlation_se,
    ks_distance,
    lattice_ks_distance,
    moment_summary,
    ols_fit,
)

#: Right end ``-(3 pi / 2)^{2/3}`` of the Airy variance window ``(-T, a)``.
AIRY_WINDOW_END = -((1.5 * math.pi) ** (2.0 / 3.0))

_PI2 = math.pi ** 2

#: Logarithmic variance constants, keyed by the scan they apply to.
VARIANCE_TARGETS: Dict[str, Tuple[float, str]] = {
    "airy": (11.0 / (12.0 * _PI2), "Airy field on (-T, a): 11/(12 pi^2)"),
    "bessel": (1.0 / (4.0 * _PI2), "Bessel field on (0, T): 1/(4 pi^2)"),
    "sine": (1.0 / _PI2, "sine field on (0, L): 1/pi^2"),
    "even_sine": (1.0 / (2.0 * _PI2), "even sine field on (0, L): 1/(2 pi^2)"),
    "odd_sine": (1.0 / (2.0 * _PI2), "odd sine field on (0, L): 1/(2 pi^2)"),
    "bulk": (1.0 / _PI2, "compact group, bulk window: 1/pi^2"),
    "origin": (1.0 / (2.0 * _PI2), "SO/Sp window at theta = 0: 1/(2 pi^2)"),
}

ADJACENT_TARGET = (-0.5, "adjacent windows: correlation -1/2")
BOUNDARY_PAIR_TARGET = (-1.0 / math.sqrt(2.0), "boundary and next window at theta = 0: -1/sqrt(2)")
RATIO_TARGET = (0.5, "theta = 0 over bulk variance constant: 1/2")

EXPERIMENTS = (
    "variance_scan",
    "mean_scan",
    "adjacent_covariance_scan",
    "clt_monte_carlo",
    "adjacent_covariance_monte_carlo",
    "gue_edge_clt",
    "boundary_variance_ratio",
    "hard_edge_scale_check",
    "cumulants",
    "sample",
)

#: Fields that do not influence results and are excluded from the config hash.
_VOLATILE_FIELDS = ("output", "threads")


def code_version() -> str:
    """Installed package version, or ``"unknown"`` when running from source."""
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # pragma: no cover - depends on installation
        return "unknown"


# --------------------------------------------------------------------------
# Configuration and results
# --------------------------------------------------------------------------
@dataclass
class ExperimentConfig:
    """Full description of one experiment run.

    Parameters
    ----------
    experiment : str
        One of :data:`EXPERIMENTS`.
    field : dict, optional
        Kernel spec (``KernelSpec.to_dict`` form) for operator scans.
    ensemble : str, optional
        Ensemble name for Monte Carlo runs.
    n : int, optional
        Matrix size or group rank.
    alpha : float, optional
        LUE exponent.
    grid : tuple of float
        Interval schedule: ``T`` values for field scans, window widths in mean
        spacings for compact groups.  Must be strictly increasing.
    window : float, optional
        Width (mean spacings) of the windows used for normality and
        covariance statistics.
    n_windows : int
        Number of adjacent windows of width ``window``.
    position : {"origin", "bulk"}
        Where compact-group windows start: at ``theta = 0`` or centred at
        ``theta = pi / 2`` (``pi`` for U(n)).
    replicas, seed : int
    nodes_per_unit : float
        Quadrature resolution for operator computations.
    ell_max : int
        Highest cumulant order (``cumulants`` only).
    sampler : {"dense", "tridiagonal"}
        GUE sampling route (``gue_edge_clt`` only); both give the same
        eigenvalue law.
    output : str, optional
        Output directory (not part of the hash).
    threads : int, optional
        Worker threads (not part of the hash; results do not depend on it).
    """

    experiment: str
    field: Optional[dict] = None
    ensemble: Optional[str] = None
    n: Optional[int] = None
    alpha: Optional[float] = None
    grid: Tuple[float, ...] = ()
    window: Optional[float] = None
    n_windows: int = 3
    position: str = "origin"
    replicas: int = 1
    seed: int = 0
    nodes_per_unit: float = DEFAULT_NODES_PER_UNIT
    ell_max: int = 6
    sampler: str = "dense"
    output: Optional[str] = None
    threads: Optional[int] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        self.grid = tuple(float(g) for g in self.grid)
        if any(not b > a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid must be strictly increasing")
        if any(not math.isfinite(g) or g <= 0 for g in self.grid):
            raise ConfigError("grid values must be positive and finite")
        if int(self.replicas) < 1:
            raise ConfigError("replicas must be at least 1")
        self.replicas = int(self.replicas)
        self.seed = int(self.seed)
        self.n_windows = int(self.n_windows)
        if self.n_windows < 1:
            raise ConfigError("n_windows must be at least 1")
        if self.position not in ("origin", "bulk"):
            raise ConfigError("position must be 'origin' or 'bulk'")
        if self.window is not None and not self.window > 0:
            raise ConfigError("window must be positive")
        if self.sampler not in ("dense", "tridiagonal"):
            raise ConfigError("sampler must be 'dense' or 'tridiagonal'")
        if self.threads is not None and int(self.threads) < 1:
            raise ConfigError("threads must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = list(self.grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def canonical_json(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _VOLATILE_FIELDS}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of all result-relevant fields."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass
class ExperimentResult:
    """Tabular result of an experiment.

    Attributes
    ----------
    name : str
        Experiment name.
    columns : tuple of str
        Column names of ``rows``.
    rows : list of tuple
        One row per grid point (or per window).
    fit : Fit or None
        Least-squares fit backing the headline number, with residual.
    target : dict or None
        ``{"constant": float, "source": str}``.
    estimate : float or None
        Headline estimate compared with the target (defaults to the slope).
    config : ExperimentConfig
    metadata : dict
        ``config_hash``, ``seed``, ``timestamp``, ``code_version``.
    extra : dict
        Additional JSON-serializable diagnostics.
    """

    name: str
    columns: Tuple[str, ...]
    rows: List[tuple]
    config: ExperimentConfig
    fit: Optional[Fit] = None
    target: Optional[dict] = None
    estimate: Optional[float] = None
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimate is None and self.fit is not None:
            self.estimate = self.fit.slope
        meta = {
            "config_hash": self.config.config_hash(),
            "seed": self.seed,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "code_version": code_version(),
        }
        meta.update(self.metadata)
        self.metadata = meta

    @property
    def seed(self) -> Optional[int]:
        return self.config.seed if _is_stochastic(self.config.experiment) else None

    def column(self, name: str) -> np.ndarray:
        """Values of one column as an array."""
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    @property
    def relative_error(self) -> Optional[float]:
        if self.target is None or self.estimate is None:
            return None
        c = self.target["constant"]
        return abs(self.estimate - c) / abs(c)

    def summary_line(self) -> str:
        parts = [self.name]
        if self.fit is not None:
            parts.append(f"slope={self.fit.slope:.6g}")
            parts.append(f"residual={self.fit.residual:.3g}")
        if self.estimate is not None and (self.fit is None or self.estimate != self.fit.slope):
            parts.append(f"estimate={self.estimate:.6g}")
        if self.target is not None:
            parts.append(f"target={self.target['constant']:.6g}")
            if self.relative_error is not None:
                parts.append(f"rel_error={self.relative_error:.4f}")
        if self.seed is not None:
            parts.append(f"seed={self.seed}")
        return " ".join(parts)

    def sidecar(self) -> dict:
        """JSON sidecar content (fit, target, metadata and config echo)."""
        fit = self.fit.to_dict() if self.fit is not None else None
        return {
            "experiment": self.name,
            "config_hash": self.metadata["config_hash"],
            "seed": self.seed,
            "fit": fit,
            "target": self.target,
            "estimate": self.estimate,
            "relative_error": self.relative_error,
            "columns": list(self.columns),
            "metadata": self.metadata,
            "config": self.config.to_dict(),
            "extra": _jsonable(self.extra),
        }


def _is_stochastic(experiment: str) -> bool:
    return experiment in (
        "clt_monte_carlo",
        "adjacent_covariance_monte_carlo",
        "gue_edge_clt",
        "hard_edge_scale_check",
        "sample",
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Fit):
        return obj.to_dict()
    return obj


def _target(key) -> dict:
    const, src = VARIANCE_TARGETS[key] if isinstance(key, str) else key
    return {"constant": const, "source": src}


# --------------------------------------------------------------------------
# Result files
# --------------------------------------------------------------------------
def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def result_stem(result: ExperimentResult) -> str:
    """File stem ``<experiment>[_<label>]_seed<seed>`` (seed only when stochastic)."""
    stem = result.name
    label = result.extra.get("label")
    if label:
        stem += "_" + "".join(c if c.isalnum() or c in "-." else "-" for c in str(label))
    if result.seed is not None:
        stem += f"_seed{result.seed}"
    return stem


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def result_csv(result: ExperimentResult) -> str:
    """CSV text of the result rows (header first, ``.17g`` floats)."""
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(result.columns)
    for r in result.rows:
        w.writerow([_format_cell(v) for v in r])
    return buf.getvalue()


def write_result(result: ExperimentResult, directory: str) -> Tuple[str, str]:
    """Write ``<stem>.csv`` and ``<stem>.json`` into ``directory`` atomically.

    Both texts are rendered before anything is written, so a failure never
    leaves a partial result behind.

    Returns
    -------
    (csv_path, json_path)
    """
    stem = result_stem(result)
    csv_text = result_csv(result)
    json_text = json.dumps(result.sidecar(), indent=2, sort_keys=True) + "\n"
    csv_path = os.path.join(directory, stem + ".csv")
    json_path = os.path.join(directory, stem + ".json")
    _atomic_write(csv_path, csv_text)
    _atomic_write(json_path, json_text)
    return csv_path, json_path


# --------------------------------------------------------------------------
# Parallel helpers
# --------------------------------------------------------------------------
def default_threads() -> int:
    """Worker count from ``DPF_THREADS`` (default 1)."""
    raw = os.environ.get("DPF_THREADS")
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"DPF_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("DPF_THREADS must be at least 1")
    return n


def ordered_map(fn: Callable, items: Sequence, threads: Optional[int] = None) -> list:
    """``[fn(x) for x in items]`` evaluated on a thread pool, in input order."""
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_replicas(fn: Callable[[np.random.SeedSequence], np.ndarray], replicas: int, seed: int,
                 threads: Optional[int] = None) -> np.ndarray:
    """Stack ``fn(replica_seed(seed, i))`` for ``i < replicas`` in replica order."""
    out = ordered_map(lambda i: np.asarray(fn(replica_seed(seed, i))), list(range(int(replicas))), threads)
    return np.array(out)


# --------------------------------------------------------------------------
# Operator scans
# --------------------------------------------------------------------------
def _scan_spec(field) -> KernelSpec:
    spec = field if isinstance(field, KernelSpec) else KernelSpec.from_dict(field)
    if spec.coordinates.value != "raw":
        raise ConfigError("scans are defined in raw kernel coordinates")
    return spec


def scan_interval(spec: KernelSpec, t: float, k: int = 1) -> Tuple[float, float]:
    """The ``k``-th window of size parameter ``t`` for a field scan.

    Airy: ``(-t, a)`` for ``k = 1`` and ``(-k t, -(k-1) t)`` beyond, with
    ``a = -(3 pi / 2)^{2/3}``.  Bessel and sine-type fields: ``((k-1) t, k t)``.
    """
    fam = spec.family
    if fam is Family.AIRY:
        if k == 1:
            if not -t < AIRY_WINDOW_END:
                raise ConfigError(f"Airy scans need T > {-AIRY_WINDOW_END:.4f}")
            return (-t, AIRY_WINDOW_END)
        return (-k * t, -(k - 1) * t)
    if fam in (Family.BESSEL, Family.SINE, Family.EVEN_SINE, Family.ODD_SINE):
        return ((k - 1) * t, k * t)
    raise ConfigError(f"{fam.value} is not a limiting field")


def _scan_config(experiment, spec, grid, nodes_per_unit, threads) -> ExperimentConfig:
    return ExperimentConfig(
        experiment, field=spec.to_dict(), grid=tuple(grid),
        nodes_per_unit=nodes_per_unit, threads=threads,
    )


def variance_scan(field, T_grid, nodes_per_unit: float = DEFAULT_NODES_PER_UNIT,
                  threads: Optional[int] = None) -> ExperimentResult:
    """Count variance ``Tr A - Tr A^2`` on growing windows, with a log fit.

    Parameters
    ----------
    field : KernelSpec or dict
        Airy, Bessel, sine, even-sine or odd-sine field.
    T_grid : sequence of float
        Strictly increasing window parameters.

    Returns
    -------
    ExperimentResult
        Columns ``T, log_T, mean, variance``; the fit is variance against
        ``log T`` and the target the family's logarithmic constant.

    Examples
    --------
    >>> r = variance_scan(KernelSpec("sine"), [4, 8, 16], nodes_per_unit=8)
    >>> 0.9 < r.fit.slope * math.pi ** 2 < 1.1
    True
    """
    spec = _scan_spec(field)
    cfg = _scan_config("variance_scan", spec, T_grid, nodes_per_unit, threads)
    key = spec.family.value
    if key not in VARIANCE_TARGETS:
        raise ConfigError(f"no variance scan for {key}")

    def one(t):
        op = discretize(spec, scan_interval(spec, t), nodes_per_unit)
        mean = trace_power(op, 1)
        return (t, math.log(t), mean, mean - trace_power(op, 2))

    rows = ordered_map(one, list(cfg.grid), threads)
    fit = ols_fit([r[1] for r in rows], [r[3] for r in rows])
    return ExperimentResult("variance_scan", ("T", "log_T", "mean", "variance"), rows, cfg,
                            fit=fit, target=_target(key), extra={"label": spec.label()})


def leading_mean(spec: KernelSpec, t: float) -> float:
    """Leading term of the mean count on the :func:`mean_scan` window."""
    fam = spec.family
    if fam is Family.AIRY:
        return 2.0 / (3.0 * math.pi) * t ** 1.5
    if fam is Family.BESSEL:
        return math.sqrt(t) / math.pi
    return float(t)


def mean_scan(field, T_grid, nodes_per_unit: float = DEFAULT_NODES_PER_UNIT,
              threads: Optional[int] = None) -> ExperimentResult:
    """Mean count ``Tr A`` against its leading term.

    Windows are ``(-T, +inf)`` for Airy (tail truncated where the density is
    negligible), ``(0, T)`` for Bessel and ``(0, L)`` for sine-type fields.

    Returns
    -------
    ExperimentResult
        Columns ``T, mean, leading, residual``; ``extra["max_abs_residual"]``.
    """
    spec = _scan_spec(field)
    cfg = _scan_config("mean_scan", spec, T_grid, nodes_per_unit, threads)
    if spec.family is Family.AIRY:
        window = lambda t: (-t, math.inf)
    else:
        window = lambda t: scan_interval(spec, t)

    def one(t):
        op = discretize(spec, window(t), nodes_per_unit)
        m = trace_power(op, 1)
        lead = leading_mean(spec, t)
        return (t, m, lead, m - lead)

    rows = ordered_map(one, list(cfg.grid), threads)
    extra = {"label": spec.label(), "max_abs_residual": max(abs(r[3]) for r in rows)}
    return ExperimentResult("mean_scan", ("T", "mean", "leading", "residual"), rows, cfg, extra=extra)


def adjacent_covariance_scan(field, T_grid, nodes_per_unit: float = DEFAULT_NODES_PER_UNIT,
                             threads: Optional[int] = None) -> ExperimentResult:
    """Normalized covariance of counts in neighbouring windows.

    The windows are ``nu_1, nu_2, nu_3`` of :func:`scan_interval`; lag 1 is
    ``corr(nu_1, nu_2)`` and lag 2 is ``corr(nu_1, nu_3)``.

    Returns
    -------
    ExperimentResult
        Columns ``T, var_1, var_2, var_3, corr_lag1, corr_lag2``; the estimate
        is the lag-1 value at the largest ``T``, targeting ``-1/2``.
    """
    spec = _scan_spec(field)
    cfg = _scan_config("adjacent_covariance_scan", spec, T_grid, nodes_per_unit, threads)

    def one(t):
        ivs = IntervalFamily(tuple(scan_interval(spec, t, k) for k in (1, 2, 3)))
        c = covariance_matrix(discretize(spec, ivs, nodes_per_unit))
        v = [float(c[k, k]) for k in range(3)]
        return (t, v[0], v[1], v[2], float(c[0, 1]) / math.sqrt(v[0] * v[1]), float(c[0, 2]) / math.sqrt(v[0] * v[2]))

    rows = ordered_map(one, list(cfg.grid), threads)
    return ExperimentResult(
        "adjacent_covariance_scan",
        ("T", "var_1", "var_2", "var_3", "corr_lag1", "corr_lag2"), rows, cfg,
        target=_target(ADJACENT_TARGET), estimate=rows[-1][4], extra={"label": spec.label()},
    )


def cumulant_table(field, T: float, ell_max: int = 6,
                   nodes_per_unit: float = DEFAULT_NODES_PER_UNIT) -> ExperimentResult:
    """Counting cumulants ``C_1..C_ell_max`` on the variance-scan window of size ``T``.

    Rows are ``(ell, trace, cumulant)`` with ``trace = Tr A^ell``.
    ``extra["trace_chain"]`` records whether
    ``0 <= Tr(A - A^ell) <= (ell - 1) Tr(A - A^2)`` holds for every order.
    """
    spec = _scan_spec(field)
    cfg = _scan_config("cumulants", spec, (T,), nodes_per_unit, None)
    cfg.ell_max = int(ell_max)
    rep = counting_cumulants(discretize(spec, scan_interval(spec, T), nodes_per_unit), ell_max)
    rows = [(ell, float(rep.traces[ell - 1]), float(rep.cumulants[ell - 1])) for ell in range(1, ell_max + 1)]
    extra = {"label": spec.label(), "trace_chain": rep.trace_chain_holds(), "variance": rep.variance}
    return ExperimentResult("cumulants", ("ell", "trace", "cumulant"), rows, cfg, extra=extra)


# --------------------------------------------------------------------------
# Compact-group windows
# --------------------------------------------------------------------------
def _group_family(ensemble: Ensemble) -> Family:
    return Family(ensemble.value)


def window_origin(ensemble, n: int, position: str, span: float = 0.0) -> float:
    """Left end (rescaled units) of a run of windows of total width ``span``.

    ``origin`` starts at ``theta = 0``; ``bulk`` centres the run at
    ``theta = pi / 2`` for SO/Sp and ``theta = pi`` for U(n).
    """
    ens = Ensemble(ensemble)
    if position == "origin":
        return 0.0
    centre = math.pi if ens is Ensemble.UNITARY else math.pi / 2.0
    return compact_scale(ens.value, n) * centre - span / 2.0


def _compact_windows(cfg: ExperimentConfig) -> Tuple[List[Tuple[float, float]], List[Tuple[float, float]]]:
    """(width-scan windows, adjacent windows) in rescaled coordinates."""
    ens = Ensemble(cfg.ensemble)
    widths = list(cfg.grid)
    scan = []
    for w in widths:
        x0 = window_origin(ens, cfg.n, cfg.position, w)
        scan.append((x0, x0 + w))
    adjacent = []
    if cfg.window is not None:
        span = cfg.window * cfg.n_windows
        x0 = window_origin(ens, cfg.n, cfg.position, span)
        adjacent = [(x0 + k * cfg.window, x0 + (k + 1) * cfg.window) for k in range(cfg.n_windows)]
    return scan, adjacent


def _check_windows(ens: Ensemble, n: int, windows) -> None:
    top = compact_scale(ens.value, n) * (2.0 * math.pi if ens is Ensemble.UNITARY else math.pi)
    for lo, hi in windows:
        if lo < 0 or hi > top:
            raise ConfigError(f"window ({lo:g}, {hi:g}) leaves the range [0, {top:g}] of {ens.value}({n})")


def operator_window_statistics(ensemble, n: int, windows, nodes_per_unit: float = DEFAULT_NODES_PER_UNIT):
    """Exact finite-``n`` mean vector and covariance matrix of window counts."""
    spec = KernelSpec(_group_family(Ensemble(ensemble)), n=n)
    op = discretize(spec, IntervalFamily(tuple(windows)), nodes_per_unit)
    cov = covariance_matrix(op)
    mean = np.bincount(op.interval_tags, weights=op.diagonal, minlength=len(windows))
    return mean, cov


def _moment_row(counts) -> tuple:
    ms = moment_summary(counts)
    sd = math.sqrt(ms.variance) if ms.variance > 0 else float("nan")
    z = (counts - ms.mean) / sd if ms.variance > 0 else np.zeros(len(counts))
    return (ms.mean, ms.se_mean, ms.variance, ms.se_variance, ms.skewness, ms.se_skewness,
            ms.excess_kurtosis, ks_distance(z), lattice_ks_distance(counts, ms.mean, sd))


_MOMENT_COLUMNS = ("mean", "se_mean", "variance", "se_variance", "skewness", "se_skewness",
                   "excess_kurtosis", "ks", "lattice_ks")


def _correlations(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    cov = np.cov(counts.T.astype(float), ddof=1)
    cov = np.atleast_2d(cov)
    sd = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(sd, sd)
    return cov, corr


def compact_counts(cfg: ExperimentConfig, windows, threads: Optional[int] = None) -> np.ndarray:
    """Replica-by-window count matrix for a compact-group config."""
    ens = Ensemble(cfg.ensemble)
    c = compact_scale(ens.value, cfg.n)
    lo = np.array([w[0] for w in windows])
    hi = np.array([w[1] for w in windows])

    def one(ss):
        x = np.sort(c * sample_compact(ens, cfg.n, ss).values)
        return np.searchsorted(x, hi, side="right") - np.searchsorted(x, lo, side="right")

    return run_replicas(one, cfg.replicas, cfg.seed, threads).astype(np.int64)


def clt_monte_carlo(config: ExperimentConfig) -> ExperimentResult:
    """Monte Carlo counting statistics for a classical compact group.

    Every replica draws one Haar matrix and counts eigenangles (rescaled to
    unit mean spacing) in

    * one window ``(x0, x0 + w)`` per width ``w`` of ``config.grid``;
    * ``config.n_windows`` adjacent windows of width ``config.window``.

    Rows describe the width scan; the variance is fitted against ``log w``
    (equivalently ``log(n delta)``, up to a constant) and compared with
    ``1/pi^2`` for bulk windows and ``1/(2 pi^2)`` for SO/Sp windows at
    ``theta = 0``.  ``expected_mean`` and ``expected_variance`` are exact
    finite-``n`` operator values.

    ``extra`` holds the adjacent-window statistics: per-window moments,
    Kolmogorov distances of the normalized counts (raw and lattice-corrected),
    the empirical covariance and correlation matrices, the lag-1 and lag-2
    correlations with standard errors and their operator predictions.
    """
    cfg = config
    ens = Ensemble(cfg.ensemble)
    if ens not in COMPACT_GROUPS:
        raise ConfigError(f"{cfg.ensemble} is not a compact group")
    if cfg.n is None:
        raise ConfigError("n is required")
    scan, adjacent = _compact_windows(cfg)
    windows = scan + adjacent
    if not windows:
        raise ConfigError("need a width grid or a window")
    _check_windows(ens, cfg.n, windows)
    counts = compact_counts(cfg, windows, cfg.threads)
    n_scan = len(scan)

    rows = []
    if n_scan:
        op_mean, op_cov = zip(*(operator_window_statistics(ens, cfg.n, [w], cfg.nodes_per_unit) for w in scan))
    for j, (lo, hi) in enumerate(scan):
        w = hi - lo
        rows.append((w, math.log(w)) + _moment_row(counts[:, j])
                    + (float(op_mean[j][0]), float(op_cov[j][0, 0])))
    columns = ("width", "log_width") + _MOMENT_COLUMNS + ("expected_mean", "expected_variance")
    fit = ols_fit([r[1] for r in rows], [r[4] for r in rows]) if n_scan >= 2 else None

    key = "origin" if (cfg.position == "origin" and ens is not Ensemble.UNITARY) else "bulk"
    extra = {"label": f"{ens.value}{cfg.n}-{cfg.position}", "target_key": key}
    if fit is not None:
        extra["slope_se"] = fit.slope_se
    if adjacent:
        sub = counts[:, n_scan:]
        cov, corr = _correlations(sub)
        op_mean_a, op_cov_a = operator_window_statistics(ens, cfg.n, adjacent, cfg.nodes_per_unit)
        op_corr = op_cov_a / np.sqrt(np.outer(np.diag(op_cov_a), np.diag(op_cov_a)))
        extra["windows"] = [
            dict(zip(("lo", "hi") + _MOMENT_COLUMNS + ("expected_mean", "expected_variance"),
                     (lo, hi) + _moment_row(sub[:, k]) + (float(op_mean_a[k]), float(op_cov_a[k, k]))))
            for k, (lo, hi) in enumerate(adjacent)
        ]
        extra["covariance"] = cov
        extra["correlation"] = corr
        extra["expected_correlation"] = op_corr
        for lag in (1, 2):
            if len(adjacent) > lag:
                rho = float(corr[0, lag])
                extra[f"corr_lag{lag}"] = rho
                extra[f"corr_lag{lag}_se"] = correlation_se(rho, cfg.replicas)
                extra[f"expected_corr_lag{lag}"] = float(op_corr[0, lag])
    return ExperimentResult("clt_monte_carlo", columns, rows, cfg, fit=fit,
                            target=_target(key) if fit is not None else None, extra=extra)


def adjacent_covariance_monte_carlo(config: ExperimentConfig) -> ExperimentResult:
    """Correlations of normalized counts in adjacent and gap-separated arcs.

    Uses ``config.n_windows >= 2`` windows of ``config.window`` mean spacings.
    Rows are ``(lag, correlation, std_error, expected)`` for every lag, with
    the exact finite-``n`` operator value as ``expected``.  The estimate is
    the lag-1 correlation; its target is ``-1/2`` in the bulk and
    ``-1/sqrt(2)`` for SO/Sp windows starting at ``theta = 0``.
    """
    cfg = config
    if cfg.window is None or cfg.n_windows < 2:
        raise ConfigError("need a window and at least two adjacent windows")
    base = ExperimentConfig(**{**cfg.to_dict(), "experiment": "clt_monte_carlo", "grid": ()})
    res = clt_monte_carlo(base)
    rows = []
    for lag in range(1, cfg.n_windows):
        rho = float(res.extra["correlation"][0, lag])
        rows.append((lag, rho, correlation_se(rho, cfg.replicas), float(res.extra["expected_correlation"][0, lag])))
    ens = Ensemble(cfg.ensemble)
    boundary = cfg.position == "origin" and ens is not Ensemble.UNITARY
    target = _target(BOUNDARY_PAIR_TARGET if boundary else ADJACENT_TARGET)
    extra = dict(res.extra)
    extra["label"] = f"{ens.value}{cfg.n}-{cfg.position}"
    return ExperimentResult("adjacent_covariance_monte_carlo", ("lag", "correlation", "std_error", "expected"),
                            rows, cfg, target=target, estimate=rows[0][1], extra=extra)


def boundary_variance_ratio(ensemble, n: int, widths: Sequence[float],
                            nodes_per_unit: float = DEFAULT_NODES_PER_UNIT,
                            threads: Optional[int] = None) -> ExperimentResult:
    """Ratio of logarithmic variance constants, ``theta = 0`` window over bulk.

    Exact finite-``n`` operator variances are computed for windows
    ``(0, w)`` and for windows of the same width centred at
    ``theta = pi / 2``; each set is fitted against ``log w`` and the ratio of
    slopes compared with ``1/2``.

    Returns
    -------
    ExperimentResult
        Columns ``width, log_width, var_origin, var_bulk``; ``fit`` is the
        origin fit, ``extra["bulk_fit"]`` the bulk one.
    """
    ens = Ensemble(ensemble)
    if ens not in COMPACT_GROUPS or ens is Ensemble.UNITARY:
        raise ConfigError("the boundary ratio is defined for so_even, so_odd and sp")
    cfg = ExperimentConfig("boundary_variance_ratio", ensemble=ens.value, n=int(n), grid=tuple(widths),
                           nodes_per_unit=nodes_per_unit, threads=threads)
    windows_o = [(window_origin(ens, n, "origin", w), window_origin(ens, n, "origin", w) + w) for w in cfg.grid]
    windows_b = [(window_origin(ens, n, "bulk", w), window_origin(ens, n, "bulk", w) + w) for w in cfg.grid]
    _check_windows(ens, n, windows_o + windows_b)

    def one(j):
        _, co = operator_window_statistics(ens, n, [windows_o[j]], nodes_per_unit)
        _, cb = operator_window_statistics(ens, n, [windows_b[j]], nodes_per_unit)
        w = cfg.grid[j]
        return (w, math.log(w), float(co[0, 0]), float(cb[0, 0]))

    rows = ordered_map(one, list(range(len(cfg.grid))), threads)
    fo = ols_fit([r[1] for r in rows], [r[2] for r in rows])
    fb = ols_fit([r[1] for r in rows], [r[3] for r in rows])
    ratio = fo.slope / fb.slope
    extra = {"label": f"{ens.value}{n}", "bulk_fit": fb.to_dict(), "ratio": ratio,
             "origin_constant": fo.slope * 2 * _PI2, "bulk_constant": fb.slope * _PI2}
    return ExperimentResult("boundary_variance_ratio", ("width", "log_width", "var_origin", "var_bulk"),
                            rows, cfg, fit=fo, target=_target(RATIO_TARGET), estimate=ratio, extra=extra)


# --------------------------------------------------------------------------
# Edge experiments
# --------------------------------------------------------------------------
def airy_count_prediction(t: float, nodes_per_unit: float = DEFAULT_NODES_PER_UNIT) -> Tuple[float, float]:
    """Operator mean and variance of the Airy-field count in ``(-t, +inf)``."""
    op = discretize(KernelSpec("airy"), (-t, math.inf), nodes_per_unit)
    m = trace_power(op, 1)
    return m, m - trace_power(op, 2)


def gue_edge_clt(config: ExperimentConfig) -> ExperimentResult:
    """Counts of soft-edge rescaled GUE eigenvalues above ``-T``.

    Eigenvalues are rescaled as ``y = 2 n^{2/3} (lambda - 1)`` and counted in
    ``(-T, +inf)`` for every ``T`` in ``config.grid``.  Empirical moments are
    compared with the Airy-field operator predictions at the same ``T``.
    Matrices are drawn with the dense entry-variance sampler by default;
    ``config.sampler = "tridiagonal"`` selects the equivalent tridiagonal
    model, which only computes eigenvalues above the deepest threshold.

    Returns
    -------
    ExperimentResult
        Columns ``T`` + moment statistics + ``expected_mean``,
        ``expected_variance``; ``extra["variance_increasing"]`` reports
        whether the empirical variance grows along the grid.
    """
    cfg = config
    if cfg.n is None:
        raise ConfigError("n is required")
    if not cfg.grid:
        raise ConfigError("need a T grid")
    n = cfg.n
    scale = 2.0 * n ** (2.0 / 3.0)
    ts = np.array(cfg.grid)
    lower = 1.0 - (ts.max() + 1.0) / scale

    def one(ss):
        vals = sample_gue(n, ss, method=cfg.sampler, lower=lower).values
        y = scale * (vals - 1.0)
        return np.array([int(np.sum(y > -t)) for t in ts])

    counts = run_replicas(one, cfg.replicas, cfg.seed, cfg.threads).astype(np.int64)
    rows = []
    for j, t in enumerate(ts):
        m, v = airy_count_prediction(float(t), cfg.nodes_per_unit)
        rows.append((float(t),) + _moment_row(counts[:, j]) + (m, v))
    columns = ("T",) + _MOMENT_COLUMNS + ("expected_mean", "expected_variance")
    variances = [r[3] for r in rows]
    extra = {
        "label": f"n{n}",
        "variance_increasing": bool(all(b > a for a, b in zip(variances, variances[1:]))),
        "mean_rel_error": [abs(r[1] - r[-2]) / r[-2] for r in rows],
        "variance_rel_error": [abs(r[3] - r[-1]) / r[-1] for r in rows],
    }
    return ExperimentResult("gue_edge_clt", columns, rows, cfg, extra=extra)


def bessel_gap_median(alpha: float, nodes_per_unit: float = DEFAULT_NODES_PER_UNIT) -> float:
    """Median ``s`` of the smallest Bessel-field particle: ``det(I - K chi_(0,s)) = 1/2``."""
    spec = KernelSpec("bessel", alpha=alpha)
    g = lambda s: float(fredholm_generating(discretize(spec, (0.0, s), nodes_per_unit), 0.0)) - 0.5
    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise ConfigError("gap median not bracketed")
    return brentq(g, hi / 2.0 if hi > 1.0 else 1e-8, hi, xtol=1e-10)


def hard_edge_scale_check(config: ExperimentConfig) -> ExperimentResult:
    """Select the hard-edge map by matching the smallest-particle median.

    For every candidate map ``y = c(n) lambda`` (``lambda`` on ``[0, 4]``)
    the empirical median of the rescaled smallest LUE eigenvalue is compared
    with the Bessel-field median from the Fredholm gap probability.

    Rows are ``(map, empirical_median, std_error, expected_median)``; the
    selected map is ``extra["selected"]``.
    """
    cfg = config
    if cfg.n is None or cfg.alpha is None:
        raise ConfigError("n and alpha are required")
    n, alpha = cfg.n, float(cfg.alpha)

    def one(ss):
        return np.array([4.0 * sample_lue(n, alpha, ss).values[0]])

    smallest = run_replicas(one, cfg.replicas, cfg.seed, cfg.threads)[:, 0]
    target = bessel_gap_median(alpha, cfg.nodes_per_unit)
    q = np.sort(smallest)
    r = cfg.replicas
    # order-statistic interval for the median, half-width taken as the error
    half = 0.5 * math.sqrt(r)
    lo = q[max(int(math.floor(r / 2 - half)), 0)]
    hi = q[min(int(math.ceil(r / 2 + half)), r - 1)]
    med = float(np.median(q))
    rows = []
    for name in sorted(HARD_EDGE_MAPS):
        c = HARD_EDGE_MAPS[name](n)
        rows.append((name, c * med, c * 0.5 * (hi - lo), target))
    selected = min(rows, key=lambda row: abs(row[1] - row[3]))[0]
    extra = {"label": f"n{n}-alpha{alpha:g}", "selected": selected, "default": DEFAULT_HARD_EDGE_MAP}
    return ExperimentResult("hard_edge_scale_check", ("map", "empirical_median", "std_error", "expected_median"),
                            rows, cfg, extra=extra)


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------
def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the experiment named in ``config``."""
    e = config.experiment
    if e == "variance_scan":
        return variance_scan(config.field, config.grid, config.nodes_per_unit, config.threads)
    if e == "mean_scan":
        return mean_scan(config.field, config.grid, config.nodes_per_unit, config.threads)
    if e == "adjacent_covariance_scan":
        return adjacent_covariance_scan(config.field, config.grid, config.nodes_per_unit, config.threads)
    if e == "clt_monte_carlo":
        return clt_monte_carlo(config)
    if e == "adjacent_covariance_monte_carlo":
        return adjacent_covariance_monte_carlo(config)
    if e == "gue_edge_clt":
        return gue_edge_clt(config)
    if e == "boundary_variance_ratio":
        return boundary_variance_ratio(config.ensemble, config.n, config.grid, config.nodes_per_unit, config.threads)
    if e == "hard_edge_scale_check":
        return hard_edge_scale_check(config)
    if e == "cumulants":
        if len(config.grid) != 1:
            raise ConfigError("cumulants take exactly one T")
        return cumulant_table(config.field, config.grid[0], config.ell_max, config.nodes_per_unit)
    raise ConfigError(f"{e} is not a runnable experiment")
