"""INI configuration for the command-line tools.

Every key has a default in :data:`DEFAULTS`; a user file only needs the keys
it changes.  Sections: ``[kernel]``, ``[shapes]``, ``[sampler]``,
``[mixture]`` and ``[prior]``.
"""

import configparser
import json

import numpy as np

from ..binary_regression import BinaryRegressionConfig
from ..kernels import Matern, kernel_from_dict
from .scenarios import RANGE_GRID

__all__ = ["DEFAULTS", "load_config", "kernel_section", "binary_config", "mixture_settings", "prior_settings", "dump"]

DEFAULTS = """
[kernel]
# matern | ar1 | spline | mpp
type = matern
# Matern range (also the starting value when learn_range is on) and smoothness
range = 0.3
smoothness = 1.5
# AR(1) coefficient
rho = 0.5
# natural spline feature map: degrees of freedom and domain (blank = data range)
df = 6
lower =
upper =
# predictive process: number of knots per axis on the data bounding box
mpp_knots = 10

[shapes]
a = 1.0
b = 1.0
# learn (a, b) with particle marginal MH under independent Ga(shape, rate) priors
learn = false
prior_shape = 1.0
prior_rate = 1.0
step = 0.2
pmmh_particles = 10

[sampler]
iterations = 2000
burn_in = 1000
blocked = true
adapted = true
# metropolis_hastings | particle_gibbs
lambda_sampler = metropolis_hastings
particles = 10
# full | low | auto (low for feature-map and predictive-process kernels)
rank = auto
# discrete uniform prior over 0.01, 0.02, ..., 0.50 for the Matern range
learn_range = false
truncation = 200

[mixture]
H = 20
b = 1.0
# Pitman-Yor discount; 0 gives the Dirichlet-process case
discount = 0.0
# atom prior: (beta0, beta1) ~ N(0, sigma_beta^2 I), tau ~ Ga(a_tau, b_tau)
sigma_beta = 1.0
a_tau = 1.0
b_tau = 1.0
# center and scale the covariate before fitting (transform saved to transform.json)
standardize = false
# response grid for density summaries: lower, upper, size
y_lower = -1.0
y_upper = 2.0
y_size = 500
# threshold for P(y <= t | x) summaries (blank = none)
cdf_threshold =

[prior]
# Monte Carlo size for mu(x, x') and competitor bounds
nsim = 20000
# distances at which the prior dependence curves are tabulated
distances = 0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0
# concentration values for the competitor-bound table
b_values = 0.25, 0.5, 1, 2, 4, 8
"""


def load_config(path=None):
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cfg.read_string(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            cfg.read_file(fh)
    return cfg


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def kernel_section(cfg, points):
    """Kernel described by ``[kernel]``, with spline knots placed from ``points``."""
    k = cfg["kernel"]
    kind = k.get("type").strip().lower()
    pts = np.asarray(points, float)
    if kind == "matern":
        return kernel_from_dict({"type": "matern", "range": k.getfloat("range"), "smoothness": k.getfloat("smoothness")})
    if kind == "ar1":
        return kernel_from_dict({"type": "ar1", "rho": k.getfloat("rho")})
    if kind == "spline":
        spec = {"type": "spline", "df": k.getint("df")}
        if k.get("lower").strip() and k.get("upper").strip():
            spec["lower"], spec["upper"] = k.getfloat("lower"), k.getfloat("upper")
        return kernel_from_dict(spec, pts.ravel())
    if kind == "mpp":
        m = k.getint("mpp_knots")
        pts2 = pts.reshape(len(pts), -1)
        axes = [np.linspace(pts2[:, j].min(), pts2[:, j].max(), m) for j in range(pts2.shape[1])]
        knots = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pts2.shape[1])
        parent = {"type": "matern", "range": k.getfloat("range"), "smoothness": k.getfloat("smoothness")}
        return kernel_from_dict({"type": "mpp", "parent": parent, "knots": knots.tolist()})
    raise ValueError(f"unknown kernel type {kind!r}")


def _gamma_log_prior(shape, rate):
    def log_prior(a, b):
        if a <= 0 or b <= 0:
            return -np.inf
        return (shape - 1.0) * (np.log(a) + np.log(b)) - rate * (a + b)

    return log_prior


def binary_config(cfg, points, seed):
    kernel = kernel_section(cfg, points)
    s, sh = cfg["sampler"], cfg["shapes"]
    rank = s.get("rank").strip()
    if rank == "auto":
        rank = "full" if isinstance(kernel, Matern) or cfg["kernel"]["type"].strip().lower() == "ar1" else "low"
    return BinaryRegressionConfig(
        shape=(sh.getfloat("a"), sh.getfloat("b")),
        kernel=kernel,
        blocked=s.getboolean("blocked"),
        adapted=s.getboolean("adapted"),
        lambda_sampler=s.get("lambda_sampler").strip(),
        particles=s.getint("particles"),
        rank=rank,
        range_grid=RANGE_GRID if s.getboolean("learn_range") else None,
        ab_log_prior=_gamma_log_prior(sh.getfloat("prior_shape"), sh.getfloat("prior_rate")) if sh.getboolean("learn") else None,
        ab_step=sh.getfloat("step"),
        pmmh_particles=sh.getint("pmmh_particles"),
        iterations=s.getint("iterations"),
        burn_in=s.getint("burn_in"),
        seed=seed,
        truncation=s.getint("truncation"),
    )


def mixture_settings(cfg):
    m = cfg["mixture"]
    thr = m.get("cdf_threshold").strip()
    return {
        "H": m.getint("H"),
        "b": m.getfloat("b"),
        "discount": m.getfloat("discount"),
        "sigma_beta": m.getfloat("sigma_beta"),
        "a_tau": m.getfloat("a_tau"),
        "b_tau": m.getfloat("b_tau"),
        "standardize": m.getboolean("standardize"),
        "y_grid": np.linspace(m.getfloat("y_lower"), m.getfloat("y_upper"), m.getint("y_size")),
        "cdf_threshold": float(thr) if thr else None,
        "iterations": cfg["sampler"].getint("iterations"),
        "burn_in": cfg["sampler"].getint("burn_in"),
        "truncation": cfg["sampler"].getint("truncation"),
        "adapted": cfg["sampler"].getboolean("adapted"),
    }


def prior_settings(cfg):
    p = cfg["prior"]
    return {"nsim": p.getint("nsim"), "distances": _floats(p.get("distances")), "b_values": _floats(p.get("b_values"))}


def dump(cfg):
    """Config as a JSON-serializable nested dict."""
    return json.loads(json.dumps({s: dict(cfg[s]) for s in cfg.sections()}))
