"""Fit, predict, diagnose and replicate pipelines behind the command line."""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..binary_regression import BinaryDataset, ChainOutput, predict_probabilities, run_chain
from ..ddp_mixture import (
    AtomPrior,
    MixtureChainOutput,
    RegressionDataset,
    StickBreakingSpec,
    competitor_corr_bounds,
    conditional_cdf,
    conditional_density,
    conditional_mean,
    corr_rpm,
    mu_from_draws,
    pair_draws,
    run_mixture_chain,
    tie_probability,
)
from ..special_math import logistic
from . import config as cfgmod
from .diagnostics import (
    DiagnosticsReport,
    binary_metrics,
    density_and_regression_errors,
    ess_multivariate,
    ess_univariate,
)
from .scenarios import (
    DataError,
    ScenarioSpec,
    read_binary_csv,
    read_csv,
    read_regression_csv,
    scenario_a_density,
    scenario_a_mean,
    scenario_b_density,
    scenario_b_mean,
    scenario_grids,
    simulate,
    standardize,
    write_columns,
)

__all__ = [
    "EXPERIMENTS",
    "experiment_config",
    "fit_binary",
    "fit_ddp",
    "load_run",
    "predict",
    "diagnose",
    "prior_analyze",
    "replicate",
]

# settings layered over the defaults for each named experiment
EXPERIMENTS = {
    "cosine600": {
        "kernel": {"type": "matern", "range": "0.3", "smoothness": "1.5"},
        "shapes": {"a": "2", "b": "4"},
    },
    "spatial_binary": {
        "kernel": {"type": "matern", "range": "0.1", "smoothness": "1.5"},
        "shapes": {"a": "1", "b": "2"},
        "sampler": {"learn_range": "true"},
    },
    "scenario_a": {
        "kernel": {"type": "spline", "df": "6", "lower": "0", "upper": "1"},
        "mixture": {"sigma_beta": "10", "y_lower": "-1", "y_upper": "2"},
        "sampler": {"iterations": "5000", "burn_in": "2500"},
    },
    "scenario_b": {
        "kernel": {"type": "spline", "df": "6", "lower": "-2", "upper": "10"},
        "mixture": {"sigma_beta": "10", "y_lower": "-1", "y_upper": "10"},
        "sampler": {"iterations": "5000", "burn_in": "2500"},
    },
}


def experiment_config(name, path=None):
    """Defaults, then the experiment preset, then the user file."""
    cfg = cfgmod.load_config()
    for section, values in EXPERIMENTS.get(name, {}).items():
        for k, v in values.items():
            cfg[section][k] = v
    if path is not None:
        with open(path) as fh:
            cfg.read_file(fh)
    return cfg


def _config_from_meta(meta):
    cfg = cfgmod.load_config()
    cfg.read_dict(meta["config"])
    return cfg


def _write_meta(out, meta):
    with open(os.path.join(out, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def _save_npz(path, arrays):
    np.savez(path, **{k: v for k, v in arrays.items() if v is not None})


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def fit_binary(data_path, cfg, seed, out):
    points, z = read_binary_csv(data_path)
    config = cfgmod.binary_config(cfg, points, seed)
    chain = run_chain(config, BinaryDataset(points, z))
    os.makedirs(out, exist_ok=True)
    _save_npz(os.path.join(out, "draws.npz"), {
        "eta": chain.eta, "lam": chain.lam, "rho": chain.rho, "ab": chain.ab, "gamma": chain.gamma,
        "points": np.asarray(points, float),
    })
    _write_meta(out, {
        "kind": "binary", "seed": seed, "config": cfgmod.dump(cfg), "data": os.path.abspath(data_path),
        "elapsed": chain.elapsed, "accepted": chain.accepted, "attempts": chain.attempts,
    })
    prob = logistic(chain.eta)
    cols = _point_columns(points)
    cols.update({
        "mean": prob.mean(axis=0),
        "lower": np.quantile(prob, 0.025, axis=0),
        "upper": np.quantile(prob, 0.975, axis=0),
    })
    write_columns(os.path.join(out, "summary.csv"), cols)
    return chain


def _point_columns(points):
    p = np.asarray(points, float)
    if p.ndim == 1:
        return {"x": p}
    return {f"x{j + 1}": p[:, j] for j in range(p.shape[1])}


def _mixture_objects(cfg, x):
    m = cfgmod.mixture_settings(cfg)
    spec = StickBreakingSpec(kernel=cfgmod.kernel_section(cfg, x), H=m["H"], b=m["b"], discount=m["discount"])
    prior = AtomPrior(sigma_beta=m["sigma_beta"] ** 2 * np.eye(2), a_tau=m["a_tau"], b_tau=m["b_tau"])
    return spec, prior, m


def fit_ddp(data_path, cfg, seed, out):
    x, y = read_regression_csv(data_path)
    os.makedirs(out, exist_ok=True)
    m = cfgmod.mixture_settings(cfg)
    if m["standardize"]:
        x, _, _ = standardize(x, os.path.join(out, "transform.json"))
    spec, prior, m = _mixture_objects(cfg, x)
    chain = run_mixture_chain(spec, prior, RegressionDataset(x, y), m["iterations"], m["burn_in"], seed,
                              adapted=m["adapted"], truncation=m["truncation"])
    _save_npz(os.path.join(out, "draws.npz"), {
        "lam": chain.lam, "gamma": chain.gamma, "eta": chain.eta, "beta": chain.beta, "tau": chain.tau,
        "occupancy": chain.occupancy, "x_train": chain.x_train,
    })
    _write_meta(out, {
        "kind": "ddp", "seed": seed, "config": cfgmod.dump(cfg), "data": os.path.abspath(data_path),
        "elapsed": chain.elapsed, "accepted": chain.accepted, "attempts": chain.attempts,
        "saturated": chain.saturated,
    })
    grid = np.linspace(chain.x_train.min(), chain.x_train.max(), 100)
    write_columns(os.path.join(out, "regression.csv"), {"x": grid, "mean": conditional_mean(chain, grid)})
    return chain


def load_run(run_dir):
    """Reconstruct ``(kind, chain, cfg, meta, extra)`` from a fit directory."""
    try:
        with open(os.path.join(run_dir, "meta.json")) as fh:
            meta = json.load(fh)
        arrays = dict(np.load(os.path.join(run_dir, "draws.npz")))
    except OSError as exc:
        raise DataError(f"{run_dir}: not a fit directory ({exc.strerror})") from exc
    cfg = _config_from_meta(meta)
    get = arrays.get
    if meta["kind"] == "binary":
        chain = ChainOutput(
            eta=arrays["eta"], lam=arrays["lam"], rho=get("rho"), ab=get("ab"), gamma=get("gamma"),
            accepted=meta["accepted"], attempts=meta["attempts"], elapsed=meta["elapsed"], seed=meta["seed"],
        )
        return "binary", chain, cfg, meta, {"points": arrays["points"]}
    spec, _, _ = _mixture_objects(cfg, arrays["x_train"])
    chain = MixtureChainOutput(
        lam=arrays["lam"], gamma=get("gamma"), eta=get("eta"), beta=arrays["beta"], tau=arrays["tau"],
        occupancy=arrays["occupancy"], spec=spec, x_train=arrays["x_train"], saturated=meta["saturated"],
        accepted=meta["accepted"], attempts=meta["attempts"], elapsed=meta["elapsed"], seed=meta["seed"],
    )
    return "ddp", chain, cfg, meta, {}


# ---------------------------------------------------------------------------
# prediction and diagnostics
# ---------------------------------------------------------------------------


def _read_points(path, kind):
    if kind == "binary":
        with open(path, newline="") as fh:
            header = [h.strip() for h in next(csv.reader(fh), [])]
        cols = ["x"] if "x" in header and "x1" not in header else [c for c in ("x1", "x2") if c in header]
        if not cols:
            raise DataError(f"{path}: row 1: need column x or x1[,x2]")
        rows = read_csv(path, cols)
        pts = np.column_stack([rows[c] for c in cols])
        return pts[:, 0] if len(cols) == 1 else pts
    return read_csv(path, ("x",))["x"]


def _transform(run_dir, x):
    path = os.path.join(run_dir, "transform.json")
    if not os.path.exists(path):
        return x, None
    with open(path) as fh:
        t = json.load(fh)
    return (x - t["center"]) / t["scale"], t


def predict(run_dir, points_path, seed, out):
    kind, chain, cfg, meta, extra = load_run(run_dir)
    pts = _read_points(points_path, kind)
    os.makedirs(out, exist_ok=True)
    rng = np.random.default_rng(seed)
    if kind == "binary":
        train = extra["points"]
        config = cfgmod.binary_config(cfg, train, meta["seed"])
        res = predict_probabilities(chain, config, train, pts, rng=rng)
        cols = _point_columns(pts)
        cols.update({k: res[k] for k in ("mean", "lower", "upper")})
        write_columns(os.path.join(out, "predictions.csv"), cols)
        return res
    xs, transform = _transform(run_dir, pts)
    m = cfgmod.mixture_settings(cfg)
    y = m["y_grid"]
    dens = conditional_density(chain, xs, y, rng=rng)
    reps = len(pts)
    write_columns(os.path.join(out, "density.csv"), {
        "x": np.repeat(pts, y.size), "y": np.tile(y, reps),
        "mean": dens["mean"].ravel(), "lower": dens["lower"].ravel(), "upper": dens["upper"].ravel(),
    })
    write_columns(os.path.join(out, "mean.csv"), {"x": pts, "mean": conditional_mean(chain, xs, rng=rng)})
    if m["cdf_threshold"] is not None:
        cdf = conditional_cdf(chain, xs, m["cdf_threshold"], rng=rng)
        write_columns(os.path.join(out, "cdf.csv"), {"x": pts, **cdf})
    return dens


def _density_truth(tag, x, y):
    if tag == "scenario_a":
        return scenario_a_density(y[None, :], x[:, None]), scenario_a_mean(x)
    return scenario_b_density(y[None, :], x[:, None]), scenario_b_mean(x)


def diagnose(run_dir, out, truth_path=None, scenario=None, seed=0):
    """Diagnostics report from stored draws; accuracy metrics when a truth is given."""
    kind, chain, cfg, meta, extra = load_run(run_dir)
    ess = {}
    if kind == "binary":
        ess["lambda"] = ess_univariate(chain.lam)
        cols = [chain.lam]
        if chain.rho is not None:
            if np.ptp(chain.rho) > 0:
                ess["rho"] = ess_univariate(chain.rho)
                cols.append(chain.rho)
        mess = ess_multivariate(np.column_stack(cols))
    else:
        for h in range(chain.lam.shape[1]):
            ess[f"lambda_{h + 1}"] = ess_univariate(chain.lam[:, h])
        mess = ess_multivariate(chain.lam[:, :3])
    acc = {k: meta["accepted"][k] / meta["attempts"][k] for k in meta["attempts"] if meta["attempts"][k]}
    report = DiagnosticsReport(ess=ess, mess=mess, acceptance=acc, seconds=meta["elapsed"])
    if kind == "binary" and truth_path is not None:
        _binary_truth_metrics(report, chain, cfg, meta, extra, truth_path, seed)
    elif kind == "ddp" and (truth_path is not None or scenario is not None):
        # the density truth is analytic, so the scenario tag is all that is needed
        tag = scenario or "scenario_a"
        x_test, y_grid = scenario_grids(tag)
        xs, _ = _transform(run_dir, x_test)
        rng = np.random.default_rng(seed)
        est = conditional_density(chain, xs, y_grid, rng=rng)["mean"]
        true_d, true_m = _density_truth(tag, x_test, y_grid)
        report.density_error, report.regression_error = density_and_regression_errors(
            est, true_d, conditional_mean(chain, xs, rng=rng), true_m, y_grid)
    os.makedirs(out, exist_ok=True)
    rows = report.rows()
    write_columns(os.path.join(out, "diagnostics.csv"), {"metric": [r[0] for r in rows], "value": [r[1] for r in rows]})
    full = report.as_dict()
    full["ess_per_second"] = {k: v / meta["elapsed"] for k, v in ess.items()} if meta["elapsed"] else {}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(full, fh, indent=2, sort_keys=True)
    return report


def _binary_truth_metrics(report, chain, cfg, meta, extra, truth_path, seed):
    with open(truth_path, newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    train = extra["points"]
    if "split" in header:
        # held-out locations: metrics from the posterior predictive at the test rows
        cols = ["x1", "x2"] if train.ndim == 2 else ["x"]
        rows = read_csv(truth_path, cols + ["p"])
        with open(truth_path, newline="") as fh:
            split = np.array([r["split"] for r in csv.DictReader(fh)])
        test = split == "test"
        pts = np.column_stack([rows[c] for c in cols])[test]
        pts = pts[:, 0] if train.ndim == 1 else pts
        config = cfgmod.binary_config(cfg, train, meta["seed"])
        draws = predict_probabilities(chain, config, train, pts, rng=np.random.default_rng(seed))["draws"]
        truth = rows["p"][test]
    else:
        truth = read_csv(truth_path, ("p",))["p"]
        if truth.size != chain.eta.shape[1]:
            raise DataError(f"{truth_path}: {truth.size} rows but the fit has {chain.eta.shape[1]} points")
        draws = logistic(chain.eta)
    met = binary_metrics(draws, truth)
    report.rmse, report.mae, report.crps = met["rmse"], met["mae"], met["crps"]


# ---------------------------------------------------------------------------
# prior analysis
# ---------------------------------------------------------------------------


def prior_analyze(b, cfg, seed, out):
    """Tie-probability / correlation curves over distance and competitor bounds."""
    rng = np.random.default_rng(seed)
    ps = cfgmod.prior_settings(cfg)
    kernel = cfgmod.kernel_section(cfg, np.array([0.0, max(ps["distances"])]))
    draws = pair_draws(b, ps["nsim"], rng)
    rows = {"distance": [], "mu": [], "mu_se": [], "tie": [], "corr_rpm": []}
    for d in ps["distances"]:
        if d == 0:
            mu, se = 2.0 / ((1.0 + b) * (2.0 + b)), 0.0
        else:
            r = float(np.clip(kernel.cross(np.array([[0.0]]), np.array([[d]]))[0, 0], -1.0, 1.0))
            mu, se = mu_from_draws(r, b, draws)
        rows["distance"].append(d)
        rows["mu"].append(mu)
        rows["mu_se"].append(se)
        rows["tie"].append(tie_probability(mu, b))
        rows["corr_rpm"].append(corr_rpm(mu, b))
    os.makedirs(out, exist_ok=True)
    write_columns(os.path.join(out, "prior_curves.csv"), rows)
    table = {"b": [], "model": [], "mu": [], "mu_se": [], "stick_corr": [], "tie": [], "rpm_corr": []}
    for bb in ps["b_values"]:
        bounds = competitor_corr_bounds(bb, ps["nsim"], rng)
        for name, e in bounds.items():
            table["b"].append(bb)
            table["model"].append(name)
            table["mu"].append(e["mu"])
            table["mu_se"].append(e.get("se", 0.0))
            table["stick_corr"].append(e["stick_corr"])
            table["tie"].append(e["tie"])
            table["rpm_corr"].append(e["rpm_corr"])
    write_columns(os.path.join(out, "competitor_bounds.csv"), table)
    return rows, table


# ---------------------------------------------------------------------------
# replication
# ---------------------------------------------------------------------------


def _one_replicate(args):
    name, r, seed, cfg_dict, n, rho, out = args
    cfg = cfgmod.load_config()
    cfg.read_dict(cfg_dict)
    rdir = os.path.join(out, f"rep{r:03d}")
    spec = ScenarioSpec(name, n=n, rho=rho) if name == "spatial_binary" else ScenarioSpec(name, n=n)
    simulate(spec, seed, rdir)
    data = os.path.join(rdir, "data.csv")
    truth = os.path.join(rdir, "truth.csv")
    if name in ("cosine600", "spatial_binary"):
        fit_binary(data, cfg, seed, rdir)
        rep = diagnose(rdir, rdir, truth, seed=seed)
        metrics = {"ess_lambda": rep.ess["lambda"], "acceptance_lambda": rep.acceptance.get("lambda", np.nan),
                   "rmse": rep.rmse, "mae": rep.mae, "crps": rep.crps}
    else:
        fit_ddp(data, cfg, seed, rdir)
        rep = diagnose(rdir, rdir, truth, scenario=name, seed=seed)
        metrics = {"density_error": rep.density_error, "regression_error": rep.regression_error}
    return {"replicate": r, "seed": seed, **metrics}


def replicate(name, replicates, cfg, seed, out, jobs=1, n=None, rho=0.1):
    """Run ``replicates`` independent simulate-fit-diagnose pipelines.

    Writes ``replicates.csv`` (one row per replicate) and ``summary.csv``
    with the mean and the Monte Carlo standard error (SD / sqrt(R)).
    """
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    os.makedirs(out, exist_ok=True)
    cfg_dict = cfgmod.dump(cfg)
    tasks = [(name, r, seed + r, cfg_dict, n, rho, out) for r in range(replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_replicate, tasks))
    else:
        results = [_one_replicate(t) for t in tasks]
    keys = list(results[0])
    write_columns(os.path.join(out, "replicates.csv"), {k: [r[k] for r in results] for k in keys})
    metrics = [k for k in keys if k not in ("replicate", "seed")]
    vals = {k: np.array([r[k] for r in results], float) for k in metrics}
    se = {k: (v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else np.nan) for k, v in vals.items()}
    write_columns(os.path.join(out, "summary.csv"), {
        "metric": metrics, "mean": [vals[k].mean() for k in metrics], "mc_se": [se[k] for k in metrics],
    })
    return results
