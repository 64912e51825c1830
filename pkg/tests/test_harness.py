import csv
import json
import math
import os
import subprocess
import sys
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from lbprocess.harness import diagnostics as dg
from lbprocess.harness.cli import main
from lbprocess.harness.scenarios import (
    RANGE_GRID,
    DataError,
    ScenarioSpec,
    read_binary_csv,
    read_csv,
    scenario_a_sample,
    scenario_b_mean,
    scenario_b_sample,
    scenario_grids,
    simulate,
    standardize,
)
from lbprocess.special_math import logistic


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- scenarios


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("unknown")
    with pytest.raises(ValueError):
        ScenarioSpec("spatial_binary", n=0)
    with pytest.raises(ValueError):
        ScenarioSpec("spatial_binary", rho=0.77)
    assert RANGE_GRID[0] == 0.01 and RANGE_GRID[-1] == 0.5 and len(RANGE_GRID) == 50


def test_cosine600(tmp_path):
    data, truth = simulate(ScenarioSpec("cosine600"), seed=1, out_dir=str(tmp_path))
    assert len(data["z"]) == 600
    np.testing.assert_allclose(truth["p"], logistic(np.cos(np.pi * truth["x"])), atol=1e-12)
    written = rows(tmp_path / "truth.csv")
    assert len(written) == 600
    np.testing.assert_allclose([float(r["p"]) for r in written], truth["p"], atol=1e-12)


def test_scenario_a_weight_at_zero():
    _, comp = scenario_a_sample(np.zeros(10_000), np.random.default_rng(2))
    assert np.all(comp == 1)


def test_scenario_b_middle_branch():
    y = scenario_b_sample(np.full(10_000, 3.0), np.random.default_rng(3))
    assert scenario_b_mean(3.0) == 2.0
    assert abs(y.mean() - 2.0) < 4 * 0.05 / 100
    assert y.std() == pytest.approx(0.05, rel=0.05)


def test_simulate_deterministic_and_spatial_split():
    a, ta = simulate(ScenarioSpec("spatial_binary", n=50, n_test=20, rho=0.2), seed=4)
    b, tb = simulate(ScenarioSpec("spatial_binary", n=50, n_test=20, rho=0.2), seed=4)
    assert len(a["z"]) == 50 and len(ta["p"]) == 70
    np.testing.assert_array_equal(ta["p"], tb["p"])
    assert list(ta["split"]).count("test") == 20


def test_spatial_ingested_truth(tmp_path):
    path = tmp_path / "copula.csv"
    rng = np.random.default_rng(5)
    with open(path, "w") as fh:
        fh.write("x1,x2,p\n")
        for _ in range(30):
            fh.write(f"{rng.random()},{rng.random()},{rng.random()}\n")
    spec = ScenarioSpec("spatial_binary", n=20, n_test=10, truth="gaussian_copula_ingested", path=str(path))
    _, truth = simulate(spec, seed=5)
    assert len(truth["p"]) == 30
    short = ScenarioSpec("spatial_binary", n=40, n_test=10, truth="gaussian_copula_ingested", path=str(path))
    with pytest.raises(DataError, match="need 50 rows"):
        simulate(short, seed=5)


def test_grids():
    x, y = scenario_grids("scenario_a")
    assert len(x) == 100 and len(y) == 500 and (y[0], y[-1]) == (-1.0, 2.0)
    x, y = scenario_grids("scenario_b")
    assert (x[0], x[-1], y[-1]) == (-2.0, 10.0, 10.0)


def test_read_csv_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,z\n0.1,1\n0.2,oops\n")
    with pytest.raises(DataError, match=r"row 3"):
        read_csv(str(p), ("x", "z"))
    p.write_text("x,z\n0.1,2\n")
    with pytest.raises(DataError, match=r"row 2: z must be 0 or 1"):
        read_binary_csv(str(p))
    p.write_text("x\n0.1\n")
    with pytest.raises(DataError, match="missing column"):
        read_csv(str(p), ("x", "z"))
    with pytest.raises(DataError, match="cannot open"):
        read_csv(str(tmp_path / "absent.csv"), ("x",))


def test_standardize_sidecar(tmp_path):
    v, c, s = standardize([1.0, 2.0, 3.0], str(tmp_path / "t.json"))
    np.testing.assert_allclose(v, [-1, 0, 1])
    assert json.loads((tmp_path / "t.json").read_text()) == {"center": c, "scale": s}


# ---------------------------------------------------------------- diagnostics


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi**2)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def test_ess_iid():
    ess = dg.ess_univariate(np.random.default_rng(6).standard_normal(10_000))
    assert 8_000 <= ess <= 12_000


def test_ess_ar1():
    ratio = dg.ess_univariate(ar1(0.9, 100_000, 7)) / 100_000
    assert ratio == pytest.approx(0.1 / 1.9, rel=0.3)


def test_ess_constant_and_short():
    with pytest.warns(dg.DegenerateTraceWarning):
        assert dg.ess_univariate(np.ones(500)) == 500
    with pytest.raises(ValueError):
        dg.ess_univariate(np.zeros(50))


def test_mess_iid_and_ar1():
    x = np.random.default_rng(8).standard_normal((10_000, 2))
    assert 8_000 <= dg.ess_multivariate(x) <= 12_000
    tr = ar1(0.9, 100_000, 9)
    assert dg.ess_multivariate(tr) == pytest.approx(dg.ess_univariate(tr), rel=0.25)


def test_mess_duplicate_columns():
    x = np.random.default_rng(10).standard_normal((1000, 3))
    x[:, 2] = x[:, 0]
    with pytest.raises(np.linalg.LinAlgError, match=r"\[0, 2\]"):
        dg.ess_multivariate(x)


def test_crps_examples():
    assert dg.crps_empirical([1.0, 1.0, 1.0], 1.0) == 0.0
    assert dg.crps_empirical([0.0, 2.0], 1.0) == pytest.approx(0.5)
    rng = np.random.default_rng(11)
    for _ in range(20):
        s = rng.normal(size=rng.integers(1, 40))
        t = rng.normal()
        brute = np.abs(s - t).mean() - 0.5 * np.abs(s[:, None] - s[None, :]).mean()
        assert dg.crps_empirical(s, t) == pytest.approx(brute, abs=1e-12)
        assert dg.crps_empirical(s, t) >= 0


def test_error_metrics():
    y = np.linspace(-1, 2, 500)
    x = np.linspace(0, 1, 100)
    truth = stats.norm.pdf(y[None, :], x[:, None], 0.2)
    assert dg.density_and_regression_errors(truth, truth, x, x, y) == (0.0, 0.0)
    assert dg.density_and_regression_errors(truth, truth, x + 0.3, x, y)[1] == pytest.approx(0.3)

    y = np.linspace(-3, 3, 6001)
    est = stats.norm.pdf(y, 0.1, 0.2)[None, :]
    tru = stats.norm.pdf(y, 0.0, 0.2)[None, :]
    quad = integrate.quad(lambda t: abs(stats.norm.pdf(t, 0.1, 0.2) - stats.norm.pdf(t, 0, 0.2)), -3, 3,
                          points=[0.05])[0]
    closed = 2 * (2 * stats.norm.cdf(0.05 / 0.2) - 1)
    assert quad == pytest.approx(closed, abs=1e-8)
    got, _ = dg.density_and_regression_errors(est, tru, [0.0], [0.0], y)
    assert got == pytest.approx(quad, abs=1e-4)
    with pytest.raises(ValueError):
        dg.density_and_regression_errors(est, tru[:, :10], [0.0], [0.0], y)


def test_report_contract():
    rep = dg.DiagnosticsReport(ess={"lambda": 10.0}, mess=None, acceptance={"lambda": 0.5}, seconds=1.0, rmse=0.1)
    assert ("ess_lambda", 10.0) in rep.rows()
    assert all(name != "seconds" for name, _ in rep.rows())
    with pytest.raises(ValueError):
        dg.DiagnosticsReport(ess={"lambda": 0.0}, mess=None, acceptance={}, seconds=None)


# ---------------------------------------------------------------- CLI


SMOKE = """
[sampler]
iterations = 200
burn_in = 100
[prior]
nsim = 10000
b_values = 1
"""


@pytest.fixture
def smoke_cfg(tmp_path):
    p = tmp_path / "smoke.ini"
    p.write_text(SMOKE)
    return str(p)


def _pipeline(root, cfg, seed=1):
    d, f, g = root / "data", root / "fit", root / "diag"
    assert main(["simulate", "--scenario", "cosine600", "--seed", str(seed), "--out", str(d)]) == 0
    assert main(["fit-binary", "--data", str(d / "data.csv"), "--config", cfg, "--seed", str(seed), "--out", str(f)]) == 0
    assert main(["diagnose", "--draws", str(f), "--truth", str(d / "truth.csv"), "--out", str(g)]) == 0
    return d, f, g


def test_cli_simulate_fit_diagnose(tmp_path, smoke_cfg):
    d, f, g = _pipeline(tmp_path, smoke_cfg)
    assert len(rows(d / "data.csv")) == 600 and (d / "truth.csv").exists()
    metrics = {r["metric"]: float(r["value"]) for r in rows(g / "diagnostics.csv")}
    assert metrics["ess_lambda"] > 0
    assert 0 < metrics["acceptance_lambda"] <= 1
    assert "rmse" in metrics and "crps" in metrics
    report = json.loads((g / "report.json").read_text())
    assert report["seconds"] > 0


def test_cli_pipeline_byte_identical(tmp_path, smoke_cfg):
    _, f1, g1 = _pipeline(tmp_path / "a", smoke_cfg)
    _, f2, g2 = _pipeline(tmp_path / "b", smoke_cfg)
    for name in ("summary.csv",):
        assert (f1 / name).read_bytes() == (f2 / name).read_bytes()
    assert (g1 / "diagnostics.csv").read_bytes() == (g2 / "diagnostics.csv").read_bytes()


def test_cli_predict(tmp_path, smoke_cfg):
    _, f, _ = _pipeline(tmp_path, smoke_cfg)
    pts = tmp_path / "new.csv"
    pts.write_text("x\n0.5\n2.5\n")
    assert main(["predict", "--draws", str(f), "--points", str(pts), "--out", str(tmp_path / "pred")]) == 0
    out = rows(tmp_path / "pred" / "predictions.csv")
    assert len(out) == 2 and all(0 <= float(r["mean"]) <= 1 for r in out)


def test_cli_prior_analyze(tmp_path, smoke_cfg, capsys):
    assert main(["prior-analyze", "--b", "1.0", "--config", smoke_cfg, "--out", str(tmp_path)]) == 0
    assert "distance 0: tie probability 0.5000" in capsys.readouterr().out
    curves = rows(tmp_path / "prior_curves.csv")
    assert float(curves[0]["tie"]) == 0.5
    models = [r["model"] for r in rows(tmp_path / "competitor_bounds.csv")]
    assert models == ["M1", "M2", "M3", "M4"]


def test_cli_fit_ddp_and_diagnose(tmp_path):
    cfg = tmp_path / "ddp.ini"
    cfg.write_text("[kernel]\ntype = spline\nlower = 0\nupper = 1\n[mixture]\nH = 5\n"
                   "[sampler]\niterations = 120\nburn_in = 20\n")
    d = tmp_path / "data"
    assert main(["simulate", "--scenario", "scenario_a", "--n", "150", "--seed", "2", "--out", str(d)]) == 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["fit-ddp", "--data", str(d / "data.csv"), "--config", str(cfg), "--out", str(tmp_path / "fit")]) == 0
    assert main(["diagnose", "--draws", str(tmp_path / "fit"), "--scenario", "scenario_a",
                 "--out", str(tmp_path / "diag")]) == 0
    metrics = {r["metric"]: float(r["value"]) for r in rows(tmp_path / "diag" / "diagnostics.csv")}
    assert metrics["density_error"] >= 0 and metrics["regression_error"] >= 0


def test_cli_replicate(tmp_path, smoke_cfg):
    assert main(["replicate", "--experiment", "cosine600", "--replicates", "2", "--n", "80",
                 "--config", smoke_cfg, "--out", str(tmp_path)]) == 0
    reps = rows(tmp_path / "replicates.csv")
    assert len(reps) == 2
    summary = {r["metric"]: r for r in rows(tmp_path / "summary.csv")}
    vals = [float(r["rmse"]) for r in reps]
    assert float(summary["rmse"]["mc_se"]) == pytest.approx(np.std(vals, ddof=1) / math.sqrt(2), rel=1e-9)


def test_cli_exit_codes(tmp_path, capsys):
    assert main([]) == 2
    assert main(["simulate"]) == 2
    assert main(["simulate", "--scenario", "cosine600", "--config", str(tmp_path / "none.ini")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("x,z\n0.1,1\n0.2,7\n")
    assert main(["fit-binary", "--data", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "row 3" in capsys.readouterr().err
    assert main(["prior-analyze", "--b", "-1", "--out", str(tmp_path)]) == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lbprocess", "simulate", "--scenario", "scenario_b",
                          "--n", "10", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert os.path.exists(tmp_path / "data.csv")
