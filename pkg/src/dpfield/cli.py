"""Command-line front end ``dpf``.

Subcommands
-----------
``kernel``     tabulate a kernel (diagonal or full grid) as CSV
``variance``   variance-vs-log scan of a limiting field
``cumulants``  counting cumulants on one window
``sample``     raw eigenvalue / eigenangle draws
``clt``        Monte Carlo counting statistics (compact groups, GUE edge)

Exit codes: 0 on success, 1 on numeric or runtime failure, 2 on usage errors.

Options may also come from a JSON file given with ``--config``; command-line
flags override file values and the effective configuration is echoed into the
JSON sidecar.  ``DPF_THREADS`` sets the default of ``--threads``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np

from .ensembles import Ensemble, replica_seed, sample_compact, sample_gue, sample_lue, samples_to_csv
from .errors import CapacityError, ConfigError, DomainError, DpfError, ResolutionError, SpectrumError
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    _atomic_write,
    adjacent_covariance_monte_carlo,
    clt_monte_carlo,
    code_version,
    cumulant_table,
    default_threads,
    gue_edge_clt,
    variance_scan,
    write_result,
)
from .kernels import Family, KernelSpec, NodeEvaluator, evaluate
from .operators import DEFAULT_NODES_PER_UNIT

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

FIELDS = ("airy", "bessel", "sine", "even_sine", "odd_sine")
MAX_GRID_POINTS = 1_000_000

#: Built-in defaults, applied below config-file values and explicit flags.
DEFAULTS = {
    "kernel": {"alpha": None, "n": None, "diag": False, "step": 0.1, "output": None},
    "variance": {"alpha": None, "tmin": None, "tmax": None, "points": 5, "grid": None,
                 "nodes_per_unit": DEFAULT_NODES_PER_UNIT, "output": "results", "threads": None},
    "cumulants": {"alpha": None, "lmax": 6, "nodes_per_unit": DEFAULT_NODES_PER_UNIT,
                  "output": "results"},
    "sample": {"alpha": 0.0, "replicas": 1, "output": "results"},
    "clt": {"window": 16.0, "n_windows": 3, "widths": [4.0, 8.0, 16.0, 32.0, 64.0], "position": None,
            "replicas": 1000, "T": [2.0, 4.0, 8.0], "adjacent": False, "sampler": "dense",
            "nodes_per_unit": DEFAULT_NODES_PER_UNIT, "output": "results", "threads": None},
}
REQUIRED = {
    "kernel": ("family", "start", "stop"),
    "variance": ("field",),
    "cumulants": ("field", "T"),
    "sample": ("ensemble", "n", "seed"),
    "clt": ("group", "n", "seed"),
}


class UsageError(DpfError):
    """Invalid command-line usage (exit code 2)."""


@dataclass
class RunManifest:
    """Everything needed to reproduce one CLI run."""

    command: str
    config: dict
    seed: Optional[int]
    output: Optional[str]
    code_version: str

    def to_dict(self) -> dict:
        return asdict(self)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpf", description="Counting statistics of determinantal random point fields.")
    p.add_argument("--version", action="version", version=code_version())
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, threads=False):
        sp.add_argument("--config", help="JSON file with option values (flags take precedence)")
        sp.add_argument("--output", help="output directory (file for 'kernel'; default stdout)")
        if threads:
            sp.add_argument("--threads", type=int, help="worker threads (default: $DPF_THREADS or 1)")

    k = sub.add_parser("kernel", help="tabulate a kernel as CSV")
    k.add_argument("--family", choices=[f.value for f in Family])
    k.add_argument("--alpha", type=float)
    k.add_argument("--n", type=int)
    k.add_argument("--diag", action="store_true", default=None, help="tabulate K(x, x) only")
    k.add_argument("--from", dest="start", type=float)
    k.add_argument("--to", dest="stop", type=float)
    k.add_argument("--step", type=float)
    common(k)

    v = sub.add_parser("variance", help="variance-vs-log scan of a limiting field")
    v.add_argument("--field", choices=FIELDS)
    v.add_argument("--alpha", type=float)
    v.add_argument("--tmin", type=float)
    v.add_argument("--tmax", type=float)
    v.add_argument("--points", type=int, help="log-spaced grid points between tmin and tmax")
    v.add_argument("--grid", type=float, nargs="+", help="explicit T grid (overrides tmin/tmax)")
    v.add_argument("--nodes-per-unit", dest="nodes_per_unit", type=float)
    common(v, threads=True)

    c = sub.add_parser("cumulants", help="counting cumulants on one window")
    c.add_argument("--field", choices=FIELDS)
    c.add_argument("--alpha", type=float)
    c.add_argument("--T", dest="T", type=float)
    c.add_argument("--lmax", type=int)
    c.add_argument("--nodes-per-unit", dest="nodes_per_unit", type=float)
    common(c)

    s = sub.add_parser("sample", help="eigenvalue or eigenangle draws")
    s.add_argument("--ensemble", choices=[e.value for e in Ensemble])
    s.add_argument("--n", type=int)
    s.add_argument("--alpha", type=float, help="LUE exponent")
    s.add_argument("--replicas", type=int)
    s.add_argument("--seed", type=int)
    common(s)

    m = sub.add_parser("clt", help="Monte Carlo counting statistics")
    m.add_argument("--group", choices=["unitary", "so_even", "so_odd", "sp", "gue"])
    m.add_argument("--n", type=int)
    m.add_argument("--window", type=float, help="window width in mean spacings")
    m.add_argument("--n-windows", dest="n_windows", type=int)
    m.add_argument("--widths", type=float, nargs="+", help="width grid (mean spacings) for the slope fit")
    m.add_argument("--position", choices=["origin", "bulk"])
    m.add_argument("--T", dest="T", type=float, nargs="+", help="edge depths for --group gue")
    m.add_argument("--sampler", choices=["dense", "tridiagonal"], help="GUE sampling route for --group gue")
    m.add_argument("--adjacent", action="store_true", default=None, help="report adjacent-window correlations")
    m.add_argument("--replicas", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--nodes-per-unit", dest="nodes_per_unit", type=float)
    common(m, threads=True)
    return p


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    # a RunManifest nests the options under "config"
    if "command" in doc and isinstance(doc.get("config"), dict):
        doc = doc["config"]
    return {k.replace("-", "_"): v for k, v in doc.items()}


def effective_options(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, config-file values and explicit flags (in that order)."""
    cmd = args.command
    opts = dict(DEFAULTS[cmd])
    if cmd in ("variance", "clt"):
        opts["threads"] = default_threads()
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.config:
        cfg = _load_config(args.config)
        unknown = set(cfg) - set(flags)
        if unknown:
            raise UsageError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        opts.update(cfg)
    opts.update({k: v for k, v in flags.items() if v is not None})
    missing = [r for r in REQUIRED[cmd] if opts.get(r) is None]
    if missing:
        raise UsageError(f"{cmd}: missing required option(s): " + ", ".join("--" + m for m in missing))
    return opts


def _field_spec(opts) -> KernelSpec:
    alpha = opts.get("alpha")
    if opts["field"] == "bessel":
        if alpha is None:
            raise UsageError("--alpha is required for the Bessel field")
        return KernelSpec("bessel", alpha=alpha)
    if alpha is not None:
        raise UsageError(f"--alpha does not apply to the {opts['field']} field")
    return KernelSpec(opts["field"])


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    if not step > 0 or not stop >= start:
        raise UsageError("need --from <= --to and a positive --step")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count > MAX_GRID_POINTS:
        raise UsageError(f"grid of {count} points exceeds {MAX_GRID_POINTS}")
    return start + step * np.arange(count)


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        _atomic_write(path, text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------
def cmd_kernel(opts) -> int:
    spec = KernelSpec(opts["family"], alpha=opts.get("alpha"), n=opts.get("n"))
    x = _grid(opts["start"], opts["stop"], opts["step"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    if opts["diag"]:
        vals = NodeEvaluator(spec, x).diagonal()
        if not np.all(np.isfinite(vals)):
            raise SpectrumError("non-finite kernel values on the grid")
        w.writerow(["x", "K"])
        for xi, ki in zip(x, vals):
            w.writerow([format(xi, ".17g"), format(ki, ".17g")])
    else:
        xx, yy = np.meshgrid(x, x, indexing="ij")
        vals = np.asarray(evaluate(spec, xx.ravel(), yy.ravel()), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise SpectrumError("non-finite kernel values on the grid")
        w.writerow(["x", "y", "K"])
        for xi, yi, ki in zip(xx.ravel(), yy.ravel(), vals):
            w.writerow([format(xi, ".17g"), format(yi, ".17g"), format(ki, ".17g")])
    _emit(buf.getvalue(), opts.get("output"))
    return EXIT_OK


def _finish(result: ExperimentResult, opts: dict, command: str) -> int:
    manifest = RunManifest(command, {k: v for k, v in opts.items()}, result.seed, opts.get("output"), code_version())
    result.extra["manifest"] = manifest.to_dict()
    csv_path, json_path = write_result(result, opts["output"])
    print(result.summary_line())
    print(f"wrote {csv_path} {json_path}")
    return EXIT_OK


def cmd_variance(opts) -> int:
    spec = _field_spec(opts)
    if opts.get("grid"):
        grid = sorted(float(t) for t in opts["grid"])
    else:
        if opts.get("tmin") is None or opts.get("tmax") is None:
            raise UsageError("give --tmin and --tmax, or --grid")
        if not 0 < opts["tmin"] < opts["tmax"] or opts["points"] < 2:
            raise UsageError("need 0 < tmin < tmax and at least two points")
        grid = np.geomspace(opts["tmin"], opts["tmax"], opts["points"]).tolist()
    result = variance_scan(spec, grid, opts["nodes_per_unit"], opts["threads"])
    return _finish(result, opts, "variance")


def cmd_cumulants(opts) -> int:
    spec = _field_spec(opts)
    result = cumulant_table(spec, opts["T"], opts["lmax"], opts["nodes_per_unit"])
    rc = _finish(result, opts, "cumulants")
    print(f"C_2={result.extra['variance']:.17g} trace_chain={str(result.extra['trace_chain']).lower()}")
    return rc


def cmd_sample(opts) -> int:
    ens = Ensemble(opts["ensemble"])
    n, seed, reps = int(opts["n"]), int(opts["seed"]), int(opts["replicas"])
    if reps < 1:
        raise UsageError("--replicas must be at least 1")
    draws = []
    for i in range(reps):
        ss = replica_seed(seed, i)
        if ens is Ensemble.GUE:
            draws.append(sample_gue(n, ss))
        elif ens is Ensemble.LUE:
            draws.append(sample_lue(n, opts["alpha"], ss))
        else:
            draws.append(sample_compact(ens, n, ss))
    cfg = ExperimentConfig("sample", ensemble=ens.value, n=n,
                           alpha=opts["alpha"] if ens is Ensemble.LUE else None,
                           replicas=reps, seed=seed, output=opts["output"])
    buf = io.StringIO()
    samples_to_csv(draws, buf)
    stem = os.path.join(opts["output"], f"sample_{ens.value}{n}_seed{seed}")
    sidecar = {
        "experiment": "sample",
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "fit": None,
        "target": None,
        "config": cfg.to_dict(),
        "manifest": RunManifest("sample", opts, seed, opts["output"], code_version()).to_dict(),
    }
    text = json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    _atomic_write(stem + ".csv", buf.getvalue())
    _atomic_write(stem + ".json", text)
    print(f"sample {ens.value} n={n} replicas={reps} seed={seed}")
    print(f"wrote {stem}.csv {stem}.json")
    return EXIT_OK


def cmd_clt(opts) -> int:
    group = opts["group"]
    common = dict(n=int(opts["n"]), replicas=int(opts["replicas"]), seed=int(opts["seed"]),
                  nodes_per_unit=opts["nodes_per_unit"], output=opts["output"], threads=opts["threads"])
    if group == "gue":
        cfg = ExperimentConfig("gue_edge_clt", ensemble="gue", grid=tuple(sorted(opts["T"])),
                               sampler=opts["sampler"], **common)
        result = gue_edge_clt(cfg)
    else:
        position = opts["position"] or ("bulk" if group == "unitary" else "origin")
        kind = "adjacent_covariance_monte_carlo" if opts["adjacent"] else "clt_monte_carlo"
        cfg = ExperimentConfig(kind, ensemble=group, window=opts["window"], n_windows=opts["n_windows"],
                               position=position, grid=() if opts["adjacent"] else tuple(sorted(opts["widths"])),
                               **common)
        result = adjacent_covariance_monte_carlo(cfg) if opts["adjacent"] else clt_monte_carlo(cfg)
    rc = _finish(result, opts, "clt")
    extra = result.extra
    if "windows" in extra:
        w0 = extra["windows"][0]
        print(f"window0 mean={w0['mean']:.6g} se={w0['se_mean']:.3g} variance={w0['variance']:.6g} "
              f"skewness={w0['skewness']:.4f} ks={w0['ks']:.4f} lattice_ks={w0['lattice_ks']:.4f}")
    if "corr_lag1" in extra:
        print(f"corr_lag1={extra['corr_lag1']:.4f}+-{extra['corr_lag1_se']:.4f} "
              f"(operator {extra['expected_corr_lag1']:.4f})")
    return rc


COMMANDS = {
    "kernel": cmd_kernel,
    "variance": cmd_variance,
    "cumulants": cmd_cumulants,
    "sample": cmd_sample,
    "clt": cmd_clt,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        opts = effective_options(args)
        return COMMANDS[args.command](opts)
    except (UsageError, ConfigError, DomainError) as exc:
        print(f"dpf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResolutionError, CapacityError, SpectrumError, DpfError, ArithmeticError,
            np.linalg.LinAlgError, OSError) as exc:
        print(f"dpf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
