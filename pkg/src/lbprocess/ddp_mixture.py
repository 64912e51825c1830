"""Logistic-beta dependent stick-breaking mixtures for density regression.

Stick ratios are ``V_h(x) = logistic(eta_h(x))`` with independent
``eta_h ~ LBP(a_h, b_h, R)``; the Dirichlet-process case uses
``(a_h, b_h) = (1, b)`` and the Pitman-Yor case ``(1 - s, b + h s)``.
Components are normal linear regressions ``N(beta_0h + beta_1h x, 1/tau_h)``.

Component indices are zero-based here: ``s_i = 0`` is the first component
and level ``h`` owns the data ``{i : s_i >= h}``.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .binary_regression import (
    BinaryRegressionConfig,
    BinaryRegressionState,
    BinarySampler,
    SamplerError,
    _conditional_operator,
)
from .kernels import build_matrix, cholesky_jitter
from .logistic_beta import LBParams, sample_mvlb
from .polya import DEFAULT_TRUNCATION, polya_mean, sample_polya
from .special_math import log_logistic, log_sum_exp

__all__ = [
    "StickBreakingSpec",
    "AtomPrior",
    "AtomParams",
    "RegressionDataset",
    "MixtureState",
    "MixtureChainOutput",
    "SaturationWarning",
    "stick_weights",
    "log_stick_weights",
    "sample_prior_lbddp",
    "alg2_step_allocations",
    "alg2_step_weights",
    "alg2_step_atoms",
    "MixtureSampler",
    "level_streams",
    "run_mixture_chain",
    "conditional_density",
    "conditional_cdf",
    "conditional_mean",
    "mu_mc",
    "mu_mc_corr",
    "pair_draws",
    "mu_from_draws",
    "tie_probability",
    "corr_rpm",
    "simulate_tie_probability",
    "simulate_rpm_correlation",
    "competitor_corr_bounds",
    "continuity_check",
]


class SaturationWarning(UserWarning):
    """Every component of the truncated mixture was occupied."""


@dataclass(frozen=True)
class StickBreakingSpec:
    kernel: object
    H: int = 20
    b: float = 1.0
    discount: float = 0.0

    def __post_init__(self):
        if self.H < 2:
            raise ValueError("truncation H must be at least 2")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not self.b > -self.discount:
            raise ValueError("need b > -discount")
        if self.discount == 0.0 and not self.b > 0:
            raise ValueError("concentration b must be positive")

    def shapes(self):
        """``(a_h, b_h)`` for the ``H - 1`` random levels."""
        h = np.arange(1, self.H)
        return [LBParams(1.0 - self.discount, self.b + k * self.discount) for k in h]


@dataclass(frozen=True)
class AtomPrior:
    sigma_beta: np.ndarray = field(default_factory=lambda: np.eye(2))
    a_tau: float = 1.0
    b_tau: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.sigma_beta, dtype=float)
        object.__setattr__(self, "sigma_beta", s)
        np.linalg.cholesky(s)
        if not (self.a_tau > 0 and self.b_tau > 0):
            raise ValueError("gamma hyperparameters must be positive")

    def sample(self, H, rng):
        beta = rng.multivariate_normal(np.zeros(2), self.sigma_beta, size=H)
        tau = rng.gamma(self.a_tau, 1.0 / self.b_tau, size=H)
        return AtomParams(beta, tau)


@dataclass
class AtomParams:
    beta: np.ndarray
    tau: np.ndarray

    def means(self, x):
        """Component means at ``x``; shape ``(H, len(x))``."""
        x = np.atleast_1d(np.asarray(x, float))
        return self.beta[:, :1] + self.beta[:, 1:] * x[None, :]


@dataclass
class RegressionDataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.x.size < 1 or self.x.size != self.y.size:
            raise ValueError("x and y must be nonempty and of equal length")

    @property
    def n(self):
        return self.x.size


@dataclass
class MixtureState:
    s: np.ndarray
    levels: list
    atoms: AtomParams

    def eta_matrix(self):
        return np.vstack([lv.eta for lv in self.levels])


# ---------------------------------------------------------------------------
# stick weights and prior simulation
# ---------------------------------------------------------------------------


def log_stick_weights(eta_levels):
    """Log weights from ``H - 1`` stick logits (rows); the last stick is 1."""
    eta = np.asarray(eta_levels, dtype=float)
    up = log_logistic(eta)
    down = log_logistic(-eta)
    before = np.concatenate([np.zeros_like(down[:1]), np.cumsum(down, axis=0)], axis=0)
    return np.concatenate([up + before[:-1], before[-1:]], axis=0)


def stick_weights(eta_levels):
    """Stick-breaking weights; shape ``(H,)`` or ``(H, n)`` for ``(H-1,)`` or ``(H-1, n)`` input."""
    return np.exp(log_stick_weights(eta_levels))


def sample_prior_lbddp(spec, points, atom_prior, rng, size=None, truncation=DEFAULT_TRUNCATION):
    """Prior draw of stick logits, weights and atoms at ``points``.

    Returns a dict with ``eta`` ``(H-1, n)``, ``lam`` ``(H-1,)``,
    ``weights`` ``(H, n)`` and ``atoms``; with ``size`` every array gains a
    leading draw axis (atoms are then omitted).
    """
    pts = np.asarray(points, dtype=float)
    R = build_matrix(spec.kernel, pts)
    count = 1 if size is None else int(size)
    eta = np.empty((count, spec.H - 1, R.n))
    lam = np.empty((count, spec.H - 1))
    for h, shape in enumerate(spec.shapes()):
        draw = sample_mvlb(shape, R, rng, size=count, truncation=truncation)
        eta[:, h] = draw.eta
        lam[:, h] = draw.lam
    weights = np.exp(log_stick_weights(np.moveaxis(eta, 1, 0)))
    weights = np.moveaxis(weights, 0, 1)
    if size is None:
        return {"eta": eta[0], "lam": lam[0], "weights": weights[0], "atoms": atom_prior.sample(spec.H, rng)}
    return {"eta": eta, "lam": lam, "weights": weights}


# ---------------------------------------------------------------------------
# Gibbs steps
# ---------------------------------------------------------------------------


def _normal_logpdf(y, mean, tau):
    return 0.5 * (np.log(tau) - math.log(2.0 * math.pi)) - 0.5 * tau * (y - mean) ** 2


def alg2_step_allocations(state, data, rng):
    """Draw every allocation from its categorical full conditional."""
    logw = log_stick_weights(state.eta_matrix())
    means = state.atoms.means(data.x)
    logp = logw + _normal_logpdf(data.y[None, :], means, state.atoms.tau[:, None])
    logp -= log_sum_exp(logp, axis=0)[None, :]
    cdf = np.cumsum(np.exp(logp), axis=0)
    u = rng.random(data.n) * cdf[-1]
    s = (cdf < u[None, :]).sum(axis=0)
    return np.minimum(s, logp.shape[0] - 1)


def alg2_step_weights(state, samplers, rng, counters=None):
    """One binary-regression cycle per level on ``I_h = {i : s_i >= h}``.

    ``rng`` is a single generator or a sequence with one generator per level.
    Levels whose index set is empty see no data, so their cycle leaves the
    prior invariant.
    """
    rngs = rng if isinstance(rng, (list, tuple)) else [rng] * len(samplers)
    for h, (lv, smp) in enumerate(zip(state.levels, samplers)):
        active = state.s >= h
        z = (state.s == h).astype(float)
        smp.cycle(lv, z, rngs[h], active=active, counters=counters)
    return state.levels


def alg2_step_atoms(state, data, atom_prior, rng):
    """Conjugate normal / gamma updates of each component's regression atoms."""
    H = len(state.atoms.tau)
    prec0 = np.linalg.inv(atom_prior.sigma_beta)
    beta = np.empty((H, 2))
    tau = np.empty(H)
    for h in range(H):
        idx = state.s == h
        X = np.column_stack([np.ones(idx.sum()), data.x[idx]])
        y = data.y[idx]
        t = state.atoms.tau[h]
        V = np.linalg.inv(t * X.T @ X + prec0)
        mean = t * V @ (X.T @ y)
        beta[h] = rng.multivariate_normal(mean, 0.5 * (V + V.T))
        resid = y - X @ beta[h]
        tau[h] = rng.gamma(atom_prior.a_tau + 0.5 * idx.sum(), 1.0 / (atom_prior.b_tau + 0.5 * resid @ resid))
    return AtomParams(beta, tau)


# ---------------------------------------------------------------------------
# chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixtureChainOutput:
    """Retained draws.  ``gamma`` is stored for feature-map kernels, ``eta``
    (at the training points) otherwise."""

    lam: np.ndarray
    gamma: np.ndarray | None
    eta: np.ndarray | None
    beta: np.ndarray
    tau: np.ndarray
    occupancy: np.ndarray
    spec: StickBreakingSpec
    x_train: np.ndarray
    saturated: bool
    accepted: dict
    attempts: dict
    elapsed: float
    seed: int

    @property
    def draws(self):
        return len(self.lam)


class MixtureSampler:
    def __init__(self, spec, atom_prior, data, rank=None, adapted=True, truncation=DEFAULT_TRUNCATION):
        self.spec = spec
        self.atom_prior = atom_prior
        self.data = data
        R = build_matrix(spec.kernel, data.x)
        if rank is None:
            rank = "low" if R.is_low_rank else "full"
        self.samplers = []
        for shape in spec.shapes():
            cfg = BinaryRegressionConfig(
                shape=shape, kernel=spec.kernel, rank=rank, adapted=adapted,
                iterations=2, burn_in=0, truncation=truncation,
            )
            self.samplers.append(BinarySampler(cfg, data.x, R=R))
        if not R.is_low_rank:
            chol = cholesky_jitter(R.dense)[0]
            for smp in self.samplers:
                smp._chol = chol

    def initial_state(self, rng):
        levels = []
        for smp in self.samplers:
            shape = smp.config.shape
            lam = polya_mean(shape.polya)
            levels.append(BinaryRegressionState(
                eta=np.full(self.data.n, shape.location(lam)), lam=lam,
                omega=np.zeros(self.data.n), ab=shape, lam_bar=lam, m=1,
            ))
        atoms = self.atom_prior.sample(self.spec.H, rng)
        s = rng.integers(0, min(self.spec.H, 5), size=self.data.n)
        return MixtureState(s=s, levels=levels, atoms=atoms)

    def cycle(self, state, rng, counters=None, level_rngs=None):
        state.s = alg2_step_allocations(state, self.data, rng)
        alg2_step_weights(state, self.samplers, rng if level_rngs is None else level_rngs, counters)
        state.atoms = alg2_step_atoms(state, self.data, self.atom_prior, rng)
        return state


def level_streams(seed, iteration, n_levels):
    """Independent generators keyed by ``(seed, iteration, level)``."""
    return [np.random.default_rng([seed, iteration, h]) for h in range(n_levels)]


def run_mixture_chain(spec, atom_prior, data, iterations, burn_in, seed, rank=None, adapted=True,
                      truncation=DEFAULT_TRUNCATION):
    """Blocked Gibbs sampler for the dependent stick-breaking mixture."""
    if not iterations > burn_in >= 0:
        raise ValueError("need iterations > burn_in >= 0")
    rng = np.random.default_rng(seed)
    sampler = MixtureSampler(spec, atom_prior, data, rank, adapted, truncation)
    state = sampler.initial_state(rng)
    keep = iterations - burn_in
    H = spec.H
    low = sampler.samplers[0].low_rank and sampler.samplers[0].R.is_exact_factor
    q = sampler.samplers[0].R.factor.shape[1] if low else None
    lam = np.empty((keep, H - 1))
    gamma = np.empty((keep, H - 1, q)) if low else None
    eta = None if low else np.empty((keep, H - 1, data.n))
    beta = np.empty((keep, H, 2))
    tau = np.empty((keep, H))
    occ = np.empty((keep, H), dtype=int)
    saturated = False
    counters = {}
    start = time.perf_counter()
    for it in range(iterations):
        try:
            sampler.cycle(state, rng, counters, level_streams(seed, it, H - 1))
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            raise SamplerError(str(exc), it) from exc
        counts = np.bincount(state.s, minlength=H)
        if not saturated and np.all(counts > 0):
            saturated = True
            warnings.warn(
                f"all {H} components occupied at iteration {it}; consider a larger H",
                SaturationWarning, stacklevel=2,
            )
        j = it - burn_in
        if j >= 0:
            lam[j] = [lv.lam for lv in state.levels]
            if low:
                gamma[j] = np.vstack([lv.gamma for lv in state.levels])
            else:
                eta[j] = state.eta_matrix()
            beta[j] = state.atoms.beta
            tau[j] = state.atoms.tau
            occ[j] = counts
    elapsed = time.perf_counter() - start
    return MixtureChainOutput(
        lam=lam, gamma=gamma, eta=eta, beta=beta, tau=tau, occupancy=occ, spec=spec,
        x_train=data.x.copy(), saturated=saturated,
        accepted={k: v[0] for k, v in counters.items()},
        attempts={k: v[1] for k, v in counters.items()},
        elapsed=elapsed, seed=seed,
    )


# ---------------------------------------------------------------------------
# posterior functionals
# ---------------------------------------------------------------------------


def _eta_at(chain, x_new, rng):
    """Stick logits at ``x_new`` for every retained draw, shape ``(draws, H-1, m)``."""
    shapes = chain.spec.shapes()
    loc = np.array([[s.location(l) for s, l in zip(shapes, row)] for row in chain.lam])
    x_new = np.atleast_1d(np.asarray(x_new, float))
    if chain.gamma is not None:
        phi = build_matrix(chain.spec.kernel, x_new).factor
        return loc[:, :, None] + np.sqrt(chain.lam)[:, :, None] * np.einsum("dhq,mq->dhm", chain.gamma, phi)
    A, root = _conditional_operator(chain.spec.kernel, chain.x_train, x_new)
    centered = chain.eta - loc[:, :, None]
    noise = rng.standard_normal(chain.lam.shape + (root.shape[1],)) @ root.T
    return loc[:, :, None] + centered @ A.T + np.sqrt(chain.lam)[:, :, None] * noise


def _per_draw_mixture(chain, x, rng):
    """Weights and component means at ``x``: arrays ``(draws, H, m)``."""
    eta = _eta_at(chain, x, rng)
    w = np.exp(log_stick_weights(np.moveaxis(eta, 1, 0)))
    w = np.moveaxis(w, 0, 1)
    x = np.atleast_1d(np.asarray(x, float))
    mu = chain.beta[:, :, :1] + chain.beta[:, :, 1:] * x[None, None, :]
    return w, mu


def conditional_density(chain, x, y_grid, levels=(0.025, 0.975), rng=None):
    """Posterior mean and pointwise band of ``f(y | x)`` on ``y_grid``.

    ``x`` may be a scalar or a vector; outputs have shape ``(len(x), len(y_grid))``
    (squeezed for scalar ``x``).  ``mc_se`` is a batch-means standard error
    of the posterior mean.
    """
    rng = np.random.default_rng(chain.seed + 7) if rng is None else rng
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, float))
    y = np.asarray(y_grid, float)
    w, mu = _per_draw_mixture(chain, xs, rng)
    sd = 1.0 / np.sqrt(chain.tau)
    mean = np.empty((xs.size, y.size))
    lo = np.empty_like(mean)
    hi = np.empty_like(mean)
    se = np.empty_like(mean)
    for j in range(xs.size):
        dens = np.zeros((chain.draws, y.size))
        for h in range(chain.spec.H):
            z = (y[None, :] - mu[:, h, j, None]) / sd[:, h, None]
            dens += w[:, h, j, None] * np.exp(-0.5 * z * z) / (sd[:, h, None] * math.sqrt(2.0 * math.pi))
        mean[j] = dens.mean(axis=0)
        lo[j], hi[j] = np.quantile(dens, levels, axis=0)
        se[j] = _batch_se(dens)
    if scalar:
        return {"mean": mean[0], "lower": lo[0], "upper": hi[0], "mc_se": se[0]}
    return {"mean": mean, "lower": lo, "upper": hi, "mc_se": se}


def _batch_se(values):
    """Batch-means standard error of column means (batch size ``floor(sqrt(n))``)."""
    n = len(values)
    size = max(int(math.isqrt(n)), 1)
    k = n // size
    if k < 2:
        return np.full(values.shape[1:], np.nan)
    batches = values[: k * size].reshape(k, size, *values.shape[1:]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / math.sqrt(k)


def conditional_cdf(chain, x, t, levels=(0.025, 0.975), rng=None):
    """Posterior summary of ``P(y <= t | x)``."""
    rng = np.random.default_rng(chain.seed + 7) if rng is None else rng
    w, mu = _per_draw_mixture(chain, x, rng)
    sd = 1.0 / np.sqrt(chain.tau)
    cdf = (w * special.ndtr((t - mu) / sd[:, :, None])).sum(axis=1)
    out = {"mean": cdf.mean(axis=0), "lower": np.quantile(cdf, levels[0], axis=0),
           "upper": np.quantile(cdf, levels[1], axis=0)}
    if np.ndim(x) == 0:
        out = {k: float(v[0]) for k, v in out.items()}
    return out


def conditional_mean(chain, x, rng=None):
    """Posterior mean of ``E(y | x)``."""
    rng = np.random.default_rng(chain.seed + 7) if rng is None else rng
    w, mu = _per_draw_mixture(chain, x, rng)
    return (w * mu).sum(axis=1).mean(axis=0)


# ---------------------------------------------------------------------------
# prior dependence
# ---------------------------------------------------------------------------


def pair_draws(b, nsim, rng, truncation=DEFAULT_TRUNCATION):
    """Shared ingredients ``(lam, z1, z2)`` for bivariate LB(1, b) vectors at any correlation."""
    if nsim < 10_000:
        raise ValueError("nsim must be at least 1e4")
    lam = sample_polya((1.0, b), rng, size=nsim, truncation=truncation)
    z = rng.standard_normal((2, nsim))
    return lam, z[0], z[1]


def mu_from_draws(r, b, draws):
    """``(estimate, standard_error)`` of ``E[V V']`` at correlation ``r`` from :func:`pair_draws`.

    Reusing one set of draws across several ``r`` gives common random numbers,
    so differences between correlations are estimated far more precisely
    than the individual values.
    """
    if not -1.0 <= r <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    lam, z1, z2 = draws
    m = 0.5 * lam * (1.0 - b)
    root = np.sqrt(lam)
    eta1 = m + root * z1
    eta2 = m + root * (r * z1 + math.sqrt(max(1.0 - r * r, 0.0)) * z2)
    prod = special.expit(eta1) * special.expit(eta2)
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(prod.size))


def mu_mc_corr(r, b, nsim, rng, truncation=DEFAULT_TRUNCATION):
    """Monte Carlo ``E[V V']`` for ``(V, V') = logistic(eta)``, eta ~ LB(1, b) with correlation ``r``.

    Returns ``(estimate, standard_error)``.
    """
    return mu_from_draws(r, b, pair_draws(b, nsim, rng, truncation))


def mu_mc(kernel, x, x_prime, b, nsim, rng, truncation=DEFAULT_TRUNCATION):
    """``mu(x, x') = E[logistic(eta(x)) logistic(eta(x'))]`` for LBP(1, b, kernel)."""
    pts = np.vstack([np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(x_prime, float))])
    r = float(np.clip(kernel.cross(pts[:1], pts[1:])[0, 0], -1.0, 1.0))
    return mu_mc_corr(r, b, nsim, rng, truncation)


def _check_mu(mu, b):
    if not b > 0:
        raise ValueError("b must be positive")
    if not 0.0 < mu < 2.0 / (1.0 + b):
        raise ValueError(f"mu={mu} outside (0, 2/(1+b))")


def tie_probability(mu, b):
    """Probability that draws from the two random measures coincide."""
    _check_mu(mu, b)
    return (1.0 + b) / (2.0 / mu - (1.0 + b))


def corr_rpm(mu, b, rho0=1.0):
    """Correlation of ``G_x(B)`` and ``G_x'(B)``; ``rho0`` is the atom-process factor."""
    _check_mu(mu, b)
    if not -1.0 <= rho0 <= 1.0:
        raise ValueError("rho0 must lie in [-1, 1]")
    return rho0 * (1.0 + b) ** 2 / (2.0 / mu - (1.0 + b))


def _pair_sticks(r, b, count, rng, truncation):
    R = np.array([[1.0, r], [r, 1.0]])
    return special.expit(sample_mvlb((1.0, b), R, rng, size=count, truncation=truncation).eta)


def simulate_tie_probability(r, b, nsim, rng, H=200, truncation=DEFAULT_TRUNCATION):
    """Brute-force tie probability: draw one label at each of two locations
    from independent-across-level stick-breaking and count coincidences.

    Labels are resolved level by level, so only levels reached by some
    unresolved simulation are drawn; the last level ``H`` takes the rest.
    Returns ``(estimate, standard_error)``.
    """
    label = np.full((nsim, 2), -1)
    for h in range(H - 1):
        open_ = np.flatnonzero((label < 0).any(axis=1))
        if open_.size == 0:
            break
        v = _pair_sticks(r, b, open_.size, rng, truncation)
        pick = rng.random((open_.size, 2)) < v
        sub = label[open_]
        sub[(sub < 0) & pick] = h
        label[open_] = sub
    label[label < 0] = H - 1
    tie = (label[:, 0] == label[:, 1]).astype(float)
    return float(tie.mean()), float(tie.std(ddof=1) / math.sqrt(nsim))


def simulate_rpm_correlation(r, b, nsim, rng, H=200, truncation=DEFAULT_TRUNCATION, tol=1e-12):
    """Brute-force ``corr{G_x(B), G_x'(B)}`` under single atoms.

    ``B`` is the half-line below the base-measure median, so each atom
    falls in ``B`` independently with probability 1/2.  Levels stop early
    once the remaining stick mass is below ``tol`` at both locations (the
    neglected mass is then at most ``tol`` per realization).
    Returns ``(estimate, standard_error)``; the error comes from batch
    means because ``G_x(B)`` is far from normal.
    """
    g = np.zeros((nsim, 2))
    rest = np.ones((nsim, 2))
    for h in range(H - 1):
        open_ = np.flatnonzero(rest.max(axis=1) > tol)
        if open_.size == 0:
            break
        v = _pair_sticks(r, b, open_.size, rng, truncation)
        w = rest[open_] * v
        inside = (rng.random(open_.size) < 0.5)[:, None]
        g[open_] += w * inside
        rest[open_] -= w
    inside = (rng.random(nsim) < 0.5)[:, None]
    g += rest * inside
    c = np.corrcoef(g.T)[0, 1]
    # standard error from the spread of correlations over 20 disjoint batches
    batches = np.array_split(g, 20)
    per = np.array([np.corrcoef(bt.T)[0, 1] for bt in batches])
    return float(c), float(per.std(ddof=1) / math.sqrt(len(per)))


def competitor_corr_bounds(b, mc_nsim, rng, truncation=DEFAULT_TRUNCATION):
    """Greatest lower bounds of stick and random-measure correlations for four constructions.

    * ``M1``: logistic-beta sticks at kernel correlation -1 (Monte Carlo).
    * ``M2``: squared autoregressive construction (closed form).
    * ``M3``: independent sticks (closed form).
    * ``M4``: counter-monotonic Beta(1, b) pair (Monte Carlo).

    Each entry holds ``mu`` (the infimum of E[V V']), ``stick_corr``,
    ``tie``, ``rpm_corr`` and, for Monte Carlo entries, ``se`` of ``mu``.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    ev = 1.0 / (1.0 + b)
    var_v = b / ((1.0 + b) ** 2 * (b + 2.0))

    def entry(mu, se=None):
        out = {
            "mu": mu,
            "stick_corr": (mu - ev * ev) / var_v,
            "tie": tie_probability(mu, b),
            "rpm_corr": corr_rpm(mu, b),
        }
        if se is not None:
            out["se"] = se
        return out

    m1_mu, m1_se = mu_mc_corr(-1.0, b, mc_nsim, rng, truncation)
    m2_stick = math.sqrt(b) * (b + 1.0) * math.sqrt(b + 2.0) - b * (b + 2.0)
    m2_mu = (b**1.5 + (1.0 - b) * math.sqrt(b + 2.0)) / ((b + 1.0) * math.sqrt(b + 2.0))
    m3_mu = ev * ev
    v = rng.beta(1.0, b, size=mc_nsim)
    # counter-monotonic partner: F^{-1}(1 - F(v)) with F(v) = 1 - (1 - v)^b
    v_partner = 1.0 - (1.0 - (1.0 - v) ** b) ** (1.0 / b)
    prod = v * v_partner
    m4 = entry(float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(mc_nsim)))
    m2 = entry(m2_mu)
    m2["stick_corr_formula"] = m2_stick
    m2["rpm_corr_formula"] = (1.0 + b) / (2.0 * math.sqrt(b + 2.0) / (b**1.5 + (1.0 - b) * math.sqrt(b + 2.0)) - 1.0)
    m3 = entry(m3_mu)
    m3["rpm_corr_formula"] = (1.0 + b) / (1.0 + 2.0 * b)
    return {"M1": entry(m1_mu, m1_se), "M2": m2, "M3": m3, "M4": m4}


def continuity_check(kernel, b, x_sequence, x_prime, mc_nsim, rng, truncation=DEFAULT_TRUNCATION):
    """``corr_rpm(mu_mc(x_k, x'))`` along a sequence of inputs ``x_k``.

    All terms share one set of Monte Carlo draws.  Returns a list of
    ``(estimate, standard_error)`` pairs, the error carried through the
    derivative of the correlation in ``mu``.
    """
    draws = pair_draws(b, mc_nsim, rng, truncation)
    xp = np.atleast_1d(np.asarray(x_prime, float))[None, :]
    out = []
    for xk in x_sequence:
        r = float(kernel.cross(np.atleast_1d(np.asarray(xk, float))[None, :], xp)[0, 0])
        mu, se = mu_from_draws(float(np.clip(r, -1.0, 1.0)), b, draws)
        val = corr_rpm(mu, b)
        deriv = 2.0 * (1.0 + b) ** 2 / (mu * mu) / (2.0 / mu - (1.0 + b)) ** 2
        out.append((val, deriv * se))
    return out
