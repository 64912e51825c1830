"""Simulated scenarios, CSV ingestion and dataset files."""

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..kernels import Matern, build_matrix
from ..logistic_beta import sample_mvlb
from ..special_math import logistic

__all__ = [
    "DataError",
    "ScenarioSpec",
    "SCENARIOS",
    "RANGE_GRID",
    "simulate",
    "write_dataset",
    "read_csv",
    "read_binary_csv",
    "read_regression_csv",
    "standardize",
    "cosine_truth",
    "scenario_a_density",
    "scenario_a_mean",
    "scenario_a_sample",
    "scenario_b_density",
    "scenario_b_mean",
    "scenario_b_sample",
    "scenario_grids",
]

SCENARIOS = ("cosine600", "spatial_binary", "scenario_a", "scenario_b", "csv")
# discrete prior support of the Matern range: 0.01, 0.02, ..., 0.50
RANGE_GRID = tuple(round(0.01 * k, 2) for k in range(1, 51))
COSINE_DOMAIN = (0.0, 3.0)


class DataError(ValueError):
    """Bad input data; the message names the file and row when known."""


@dataclass(frozen=True)
class ScenarioSpec:
    """What to simulate.

    ``tag`` is one of :data:`SCENARIOS`.  ``rho`` and ``n_test`` apply to
    ``spatial_binary``; ``truth`` selects whether its latent field comes from
    the logistic-beta process (``"lbp"``) or from an ingested CSV
    (``"gaussian_copula_ingested"``, read from ``path``).
    """

    tag: str
    n: int | None = None
    rho: float = 0.1
    n_test: int = 100
    truth: str = "lbp"
    path: str | None = None

    def __post_init__(self):
        if self.tag not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.tag!r}; choose from {SCENARIOS}")
        if self.n is not None and self.n < 1:
            raise ValueError("n must be positive")
        if self.n_test < 0:
            raise ValueError("n_test must be nonnegative")
        if self.tag == "spatial_binary":
            if self.truth not in ("lbp", "gaussian_copula_ingested"):
                raise ValueError(f"unknown truth {self.truth!r}")
            if self.truth == "lbp" and not any(math.isclose(self.rho, g) for g in RANGE_GRID):
                raise ValueError(f"rho must be one of {RANGE_GRID}")
        if self.tag == "csv" or self.truth == "gaussian_copula_ingested":
            if self.path is None:
                raise ValueError("a CSV path is required")


# ---------------------------------------------------------------------------
# generating models
# ---------------------------------------------------------------------------


def cosine_truth(x):
    return logistic(np.cos(np.pi * np.asarray(x, float)))


def scenario_a_density(y, x):
    """``p_A(y | x)`` broadcast over ``y`` and ``x``."""
    w = np.exp(-2.0 * x)
    return w * stats.norm.pdf(y, x, 0.1) + (1.0 - w) * stats.norm.pdf(y, x**4, 0.2)


def scenario_a_mean(x):
    x = np.asarray(x, float)
    w = np.exp(-2.0 * x)
    return w * x + (1.0 - w) * x**4


def _b_params(x):
    x = np.asarray(x, float)
    mean = np.where(x <= 2.0, 0.0, np.where(x <= 5.0, 2.0 * x - 4.0, 6.0))
    var = np.where(x <= 2.0, 0.04, np.where(x <= 5.0, 0.0025, (x - 5.0) ** 2 / 15.0 + 0.01))
    return mean, np.sqrt(var)


def scenario_b_density(y, x):
    mean, sd = _b_params(x)
    return stats.norm.pdf(y, mean, sd)


def scenario_b_mean(x):
    return _b_params(x)[0]


def scenario_grids(tag):
    """Test covariates (100) and response grid (500) for the density scenarios."""
    if tag == "scenario_a":
        return np.linspace(0.0, 1.0, 100), np.linspace(-1.0, 2.0, 500)
    if tag == "scenario_b":
        return np.linspace(-2.0, 10.0, 100), np.linspace(-1.0, 10.0, 500)
    raise ValueError(f"no density grids for {tag!r}")


def _sim_cosine(n, rng):
    x = np.sort(rng.uniform(*COSINE_DOMAIN, size=n))
    p = cosine_truth(x)
    z = (rng.random(n) < p).astype(int)
    return {"x": x, "z": z}, {"x": x, "p": p}


def _sim_spatial(spec, rng):
    n = spec.n
    total = n + spec.n_test
    if spec.truth == "lbp":
        pts = rng.random((total, 2))
        R = build_matrix(Matern(spec.rho, 1.5), pts)
        eta = sample_mvlb((1.0, 2.0), R, rng).eta
        p = logistic(eta)
    else:
        rows = read_csv(spec.path, ("x1", "x2", "p"))
        if len(rows["p"]) < total:
            raise DataError(f"{spec.path}: need {total} rows, found {len(rows['p'])}")
        pts = np.column_stack([rows["x1"], rows["x2"]])[:total]
        p = rows["p"][:total]
        if np.any((p < 0) | (p > 1)):
            bad = int(np.flatnonzero((p < 0) | (p > 1))[0]) + 2
            raise DataError(f"{spec.path}: row {bad}: probability outside [0, 1]")
    z = (rng.random(total) < p).astype(int)
    split = np.array(["train"] * n + ["test"] * spec.n_test)
    data = {"x1": pts[:n, 0], "x2": pts[:n, 1], "z": z[:n]}
    truth = {"x1": pts[:, 0], "x2": pts[:, 1], "z": z, "p": p, "split": split}
    return data, truth


def scenario_a_sample(x, rng):
    """Responses at covariates ``x`` and the generating component (1 or 2)."""
    x = np.asarray(x, float)
    first = rng.random(x.shape) < np.exp(-2.0 * x)
    y = np.where(first, rng.normal(x, 0.1), rng.normal(x**4, 0.2))
    return y, np.where(first, 1, 2)


def scenario_b_sample(x, rng):
    mean, sd = _b_params(x)
    return rng.normal(mean, sd)


def _sim_a(n, rng):
    x = rng.uniform(0.0, 1.0, n)
    y, comp = scenario_a_sample(x, rng)
    return {"x": x, "y": y}, {"x": x, "component": comp, "mean": scenario_a_mean(x)}


def _sim_b(n, rng):
    x = rng.uniform(-2.0, 10.0, n)
    mean, sd = _b_params(x)
    y = scenario_b_sample(x, rng)
    return {"x": x, "y": y}, {"x": x, "mean": mean, "sd": sd}


def simulate(spec, seed, out_dir=None):
    """Simulate ``spec`` and optionally write ``data.csv`` and ``truth.csv``.

    Returns ``(data, truth)`` as dicts of equal-length columns.
    """
    rng = np.random.default_rng(seed)
    if spec.tag == "cosine600":
        data, truth = _sim_cosine(spec.n or 600, rng)
    elif spec.tag == "spatial_binary":
        spec = spec if spec.n is not None else ScenarioSpec(**{**spec.__dict__, "n": 400})
        data, truth = _sim_spatial(spec, rng)
    elif spec.tag == "scenario_a":
        data, truth = _sim_a(spec.n or 500, rng)
    elif spec.tag == "scenario_b":
        data, truth = _sim_b(spec.n or 500, rng)
    else:
        raise ValueError("the csv scenario is read, not simulated")
    if out_dir is not None:
        write_dataset(out_dir, data, truth)
    return data, truth


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_columns(path, columns):
    """Write a dict of equal-length columns as CSV (full-precision floats)."""
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*cols):
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_dataset(out_dir, data, truth):
    os.makedirs(out_dir, exist_ok=True)
    write_columns(os.path.join(out_dir, "data.csv"), data)
    write_columns(os.path.join(out_dir, "truth.csv"), truth)


def read_csv(path, required):
    """Read numeric columns ``required`` from a headed CSV.

    Raises :class:`DataError` naming the file and (1-based, header = 1) row.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: row 1: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in required]
        out = {c: [] for c in required}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno}: expected {len(header)} fields, found {len(row)}")
            for c, i in zip(required, idx):
                try:
                    val = float(row[i])
                except ValueError:
                    raise DataError(f"{path}: row {lineno}: column {c!r} is not numeric ({row[i]!r})") from None
                if not math.isfinite(val):
                    raise DataError(f"{path}: row {lineno}: column {c!r} is not finite")
                out[c].append(val)
    out = {c: np.asarray(v) for c, v in out.items()}
    if len(out[required[0]]) == 0:
        raise DataError(f"{path}: no data rows")
    return out


def _header(path):
    try:
        with open(path, newline="") as fh:
            return [h.strip() for h in next(csv.reader(fh), [])]
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc


def read_binary_csv(path):
    """Binary data with schema ``x1[,x2],z`` (or ``x,z``).  Returns ``(points, z)``."""
    header = _header(path)
    if "x" in header and "x1" not in header:
        cols = ["x"]
    else:
        cols = [c for c in ("x1", "x2") if c in header] or ["x1"]
    rows = read_csv(path, cols + ["z"])
    z = rows["z"]
    bad = np.flatnonzero((z != 0) & (z != 1))
    if bad.size:
        raise DataError(f"{path}: row {int(bad[0]) + 2}: z must be 0 or 1")
    points = np.column_stack([rows[c] for c in cols])
    return (points[:, 0] if len(cols) == 1 else points), z.astype(int)


def read_regression_csv(path):
    rows = read_csv(path, ("x", "y"))
    return rows["x"], rows["y"]


def standardize(values, sidecar=None):
    """Center and scale ``values``; optionally record the transform as JSON."""
    v = np.asarray(values, float)
    center = float(v.mean())
    scale = float(v.std(ddof=1)) if v.size > 1 else 1.0
    scale = scale if scale > 0 else 1.0
    if sidecar is not None:
        with open(sidecar, "w") as fh:
            json.dump({"center": center, "scale": scale}, fh, indent=2)
    return (v - center) / scale, center, scale
