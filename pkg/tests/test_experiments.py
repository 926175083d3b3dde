"""Experiment drivers, configuration hashing and result files."""
import json
import math
import os

import numpy as np
import pytest

from dpfield.errors import ConfigError
from dpfield.experiments import (
    AIRY_WINDOW_END,
    VARIANCE_TARGETS,
    ExperimentConfig,
    adjacent_covariance_monte_carlo,
    adjacent_covariance_scan,
    boundary_variance_ratio,
    clt_monte_carlo,
    cumulant_table,
    default_threads,
    gue_edge_clt,
    hard_edge_scale_check,
    mean_scan,
    ordered_map,
    result_csv,
    run_experiment,
    scan_interval,
    variance_scan,
    write_result,
)
from dpfield.kernels import KernelSpec


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("nope")
    with pytest.raises(ConfigError):
        ExperimentConfig("variance_scan", grid=(4.0, 2.0))
    with pytest.raises(ConfigError):
        ExperimentConfig("variance_scan", grid=(0.0, 2.0))
    with pytest.raises(ConfigError):
        ExperimentConfig("clt_monte_carlo", replicas=0)
    with pytest.raises(ConfigError):
        ExperimentConfig("clt_monte_carlo", position="middle")
    with pytest.raises(ConfigError):
        ExperimentConfig("gue_edge_clt", sampler="banded")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "sample", "colour": "red"})


def test_config_hash_ignores_output_and_threads():
    a = ExperimentConfig("clt_monte_carlo", ensemble="sp", n=10, grid=(2, 4), seed=3)
    b = ExperimentConfig("clt_monte_carlo", ensemble="sp", n=10, grid=(2.0, 4.0), seed=3,
                         output="/tmp/x", threads=4)
    c = ExperimentConfig("clt_monte_carlo", ensemble="sp", n=10, grid=(2, 4), seed=4)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert ExperimentConfig.from_dict(a.to_dict()) == a
    assert len(a.config_hash()) == 64


def test_default_threads(monkeypatch):
    monkeypatch.delenv("DPF_THREADS", raising=False)
    assert default_threads() == 1
    monkeypatch.setenv("DPF_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("DPF_THREADS", "zero")
    with pytest.raises(ConfigError):
        default_threads()
    assert ordered_map(lambda x: x * x, [3, 1, 2], threads=2) == [9, 1, 4]


def test_scan_intervals():
    airy = KernelSpec("airy")
    assert scan_interval(airy, 10.0) == (-10.0, AIRY_WINDOW_END)
    assert scan_interval(airy, 10.0, 2) == (-20.0, -10.0)
    assert scan_interval(KernelSpec("bessel", alpha=1.0), 5.0, 3) == (10.0, 15.0)
    with pytest.raises(ConfigError):
        scan_interval(airy, 2.0)
    with pytest.raises(ConfigError):
        scan_interval(KernelSpec("unitary", n=5), 1.0)


def test_sine_variance_scan():
    r = variance_scan(KernelSpec("sine"), [4.0, 8.0, 16.0, 32.0])
    # Tr A = L exactly for the sine kernel
    np.testing.assert_allclose(r.column("mean"), r.column("T"), atol=1e-10)
    assert r.fit.slope == pytest.approx(1 / math.pi ** 2, rel=0.02)
    assert r.target["constant"] == VARIANCE_TARGETS["sine"][0]
    assert r.seed is None
    assert "seed" not in r.summary_line()


def test_mean_scan_sine_and_bessel():
    r = mean_scan(KernelSpec("sine"), [3.0, 7.0])
    assert r.extra["max_abs_residual"] < 1e-9
    b = mean_scan(KernelSpec("bessel", alpha=0.0), [100.0, 400.0])
    # mean count grows like sqrt(T)/pi with a bounded correction
    assert np.all(np.abs(b.column("residual")) < 0.5)


def test_cumulant_second_is_variance():
    spec = KernelSpec("sine")
    t = cumulant_table(spec, 6.0, ell_max=5)
    v = variance_scan(spec, [6.0])
    assert t.rows[1][2] == pytest.approx(v.rows[0][3], abs=1e-12)
    assert t.rows[0][2] == pytest.approx(6.0, abs=1e-10)
    assert t.extra["trace_chain"]
    assert [r[0] for r in t.rows] == [1, 2, 3, 4, 5]


def test_adjacent_scan_sine():
    r = adjacent_covariance_scan(KernelSpec("sine"), [8.0, 32.0])
    rho = r.column("corr_lag1")
    assert np.all((rho < -0.4) & (rho > -0.6))
    assert abs(r.rows[-1][5]) < 0.1
    assert r.estimate == rho[-1]
    assert all(isinstance(v, float) for v in r.rows[0])


def test_write_result_format(tmp_path):
    cfg = ExperimentConfig("clt_monte_carlo", ensemble="unitary", n=20, position="bulk",
                           grid=(2.0, 4.0), replicas=30, seed=7)
    r = clt_monte_carlo(cfg)
    csv_path, json_path = write_result(r, str(tmp_path))
    assert os.path.basename(csv_path) == "clt_monte_carlo_unitary20-bulk_seed7.csv"
    raw = open(csv_path, "rb").read()
    assert raw.count(b"\r\n") == len(r.rows) + 1
    side = json.load(open(json_path))
    assert side["seed"] == 7
    assert side["config_hash"] == cfg.config_hash()
    assert side["fit"]["slope"] == pytest.approx(r.fit.slope)
    assert set(side["metadata"]) >= {"config_hash", "seed", "timestamp", "code_version"}
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]


def test_monte_carlo_independent_of_threads():
    base = dict(ensemble="so_even", n=16, grid=(2.0, 4.0), window=3.0, n_windows=3, replicas=40, seed=5)
    a = clt_monte_carlo(ExperimentConfig("clt_monte_carlo", threads=1, **base))
    b = clt_monte_carlo(ExperimentConfig("clt_monte_carlo", threads=3, **base))
    assert result_csv(a) == result_csv(b)
    assert a.extra["corr_lag1"] == b.extra["corr_lag1"]


def test_clt_small_run_matches_operator():
    cfg = ExperimentConfig("clt_monte_carlo", ensemble="unitary", n=40, position="bulk",
                           grid=(4.0, 8.0), replicas=400, seed=1)
    r = clt_monte_carlo(cfg)
    for row in r.rows:
        mean, se = row[2], row[3]
        assert abs(mean - row[-2]) < 4 * se + 1e-9
    # width w in unit-spacing coordinates: mean count is exactly w for U(n)
    np.testing.assert_allclose(r.column("expected_mean"), [4.0, 8.0], atol=1e-9)
    with pytest.raises(ConfigError):
        clt_monte_carlo(ExperimentConfig("clt_monte_carlo", ensemble="unitary", n=5, grid=(10.0,), seed=1))
    with pytest.raises(ConfigError):
        clt_monte_carlo(ExperimentConfig("clt_monte_carlo", ensemble="gue", n=5, grid=(1.0,)))


def test_adjacent_monte_carlo_targets():
    cfg = ExperimentConfig("adjacent_covariance_monte_carlo", ensemble="sp", n=30, window=4.0,
                           n_windows=3, replicas=200, seed=2)
    r = adjacent_covariance_monte_carlo(cfg)
    assert [row[0] for row in r.rows] == [1, 2]
    assert r.target["constant"] == pytest.approx(-1 / math.sqrt(2))
    lag1 = r.rows[0]
    assert abs(lag1[1] - lag1[3]) < 5 * lag1[2]
    bulk = adjacent_covariance_monte_carlo(ExperimentConfig(**{**cfg.to_dict(), "position": "bulk"}))
    assert bulk.target["constant"] == -0.5
    with pytest.raises(ConfigError):
        adjacent_covariance_monte_carlo(ExperimentConfig(**{**cfg.to_dict(), "n_windows": 1}))


def test_boundary_ratio_small_n():
    r = boundary_variance_ratio("sp", 64, [2.0, 4.0, 8.0])
    assert 0.4 < r.estimate < 0.6
    with pytest.raises(ConfigError):
        boundary_variance_ratio("unitary", 64, [2.0, 4.0])


def test_gue_edge_small():
    cfg = ExperimentConfig("gue_edge_clt", ensemble="gue", n=60, grid=(2.0, 4.0), replicas=150, seed=4)
    r = gue_edge_clt(cfg)
    assert r.columns[0] == "T"
    for row in r.rows:
        assert abs(row[1] - row[-2]) < 5 * row[2] + 0.1
    tri = gue_edge_clt(ExperimentConfig(**{**cfg.to_dict(), "sampler": "tridiagonal"}))
    assert tri.config.config_hash() != cfg.config_hash()


def test_hard_edge_selects_n_squared():
    cfg = ExperimentConfig("hard_edge_scale_check", ensemble="lue", n=30, alpha=0.0, replicas=300, seed=8)
    r = hard_edge_scale_check(cfg)
    assert r.extra["selected"] == "4n2"
    row = dict((x[0], x) for x in r.rows)["4n2"]
    # for alpha = 0 the smallest-particle median is 4 log 2
    assert row[3] == pytest.approx(4 * math.log(2), rel=1e-6)


def test_run_experiment_dispatch():
    cfg = ExperimentConfig("variance_scan", field=KernelSpec("odd_sine").to_dict(), grid=(4.0, 8.0))
    r = run_experiment(cfg)
    assert r.name == "variance_scan"
    assert r.extra["label"] == "odd_sine"
