"""Latent logistic-beta process model for binary responses and its samplers.

Model::

    z_i | eta ~ Bernoulli(logistic(eta_i)),   eta ~ LBP(a, b, R)

One blocked Gibbs cycle draws Polya-Gamma variables ``omega``, then ``lam``
with ``eta`` integrated out, then ``eta`` given ``lam``.  Optional extra
steps update a Matern range on a discrete grid and the shapes ``(a, b)``
by particle marginal Metropolis-Hastings.

Throughout, ``omega_i == 0`` marks an unobserved coordinate: it contributes
nothing to the likelihood, which lets the mixture sampler run the same code
on a subset of points while still producing the field everywhere.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .kernels import CorrelationMatrix, Matern, build_matrix, cholesky_jitter, cross_matrix
from .logistic_beta import LBParams, as_lb_params
from .polya import DEFAULT_TRUNCATION, PolyaParams, polya_mean, sample_polya, sample_polya_gamma_1
from .special_math import digamma, log_sum_exp, logistic, trigamma

__all__ = [
    "BinaryDataset",
    "BinaryRegressionConfig",
    "BinaryRegressionState",
    "ChainOutput",
    "CollapsedGaussian",
    "SamplerError",
    "step_pg",
    "collapsed_lambda_log_likelihood",
    "adaptive_proposal",
    "step_lambda_mh",
    "step_lambda_particle_gibbs",
    "step_eta",
    "eta_conditional_moments",
    "step_kernel_params",
    "step_ab_pmmh",
    "BinarySampler",
    "run_chain",
    "predict_probabilities",
]

_LOG_2PI = math.log(2.0 * math.pi)


class SamplerError(RuntimeError):
    """A sampler step failed; ``iteration`` records where."""

    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass
class BinaryDataset:
    points: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.z = np.asarray(self.z)
        if self.z.ndim != 1 or self.z.size < 1:
            raise ValueError("z must be a nonempty vector")
        if not np.all((self.z == 0) | (self.z == 1)):
            raise ValueError("z must contain only 0 and 1")
        self.z = self.z.astype(float)
        if len(self.points) != len(self.z):
            raise ValueError("points and z have different lengths")

    @property
    def n(self):
        return len(self.z)


@dataclass
class BinaryRegressionConfig:
    """Sampler settings.

    ``lambda_sampler`` is ``"metropolis_hastings"`` or ``"particle_gibbs"``;
    ``rank`` is ``"full"`` (dense algebra) or ``"low"`` (factor-based, for
    feature-map and predictive-process kernels).  ``range_grid`` switches on
    a discrete update of the Matern range with prior weights
    ``range_prior`` (uniform when omitted).  ``ab_log_prior`` switches on
    the shape update; it must return ``-inf`` outside its support.
    """

    shape: tuple = (1.0, 1.0)
    kernel: object = None
    blocked: bool = True
    adapted: bool = True
    lambda_sampler: str = "metropolis_hastings"
    particles: int = 10
    rank: str = "full"
    range_grid: tuple | None = None
    range_prior: tuple | None = None
    ab_log_prior: object = None
    ab_step: float = 0.2
    pmmh_particles: int = 10
    iterations: int = 2000
    burn_in: int = 1000
    seed: int = 0
    truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        self.shape = as_lb_params(self.shape)
        if self.kernel is None:
            raise ValueError("a kernel is required")
        if self.lambda_sampler not in ("metropolis_hastings", "particle_gibbs"):
            raise ValueError(f"unknown lambda sampler {self.lambda_sampler!r}")
        if self.rank not in ("full", "low"):
            raise ValueError(f"unknown rank mode {self.rank!r}")
        if self.particles < 1 or self.pmmh_particles < 1:
            raise ValueError("particle counts must be >= 1")
        if not (self.iterations > self.burn_in >= 0):
            raise ValueError("need iterations > burn_in >= 0")
        if self.range_grid is not None and not isinstance(self.kernel, Matern):
            raise ValueError("range updates are only supported for Matern kernels")


@dataclass
class BinaryRegressionState:
    eta: np.ndarray
    lam: float
    omega: np.ndarray
    ab: LBParams
    rho: float | None = None
    lam_bar: float = 0.0
    m: int = 0
    gamma: np.ndarray | None = None
    particles: np.ndarray | None = None
    particle_index: int = 0


@dataclass(frozen=True)
class ChainOutput:
    """Retained draws of one chain (rows are iterations after burn-in)."""

    eta: np.ndarray
    lam: np.ndarray
    rho: np.ndarray | None
    ab: np.ndarray | None
    gamma: np.ndarray | None
    accepted: dict
    attempts: dict
    elapsed: float
    seed: int

    @property
    def draws(self):
        return len(self.lam)

    def acceptance_rate(self, key="lambda"):
        tries = self.attempts.get(key, 0)
        return self.accepted.get(key, 0) / tries if tries else float("nan")


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def step_pg(eta, rng, active=None):
    """Polya-Gamma draws ``omega_i ~ PG(1, eta_i)``; zero where ``active`` is False."""
    eta = np.asarray(eta, dtype=float)
    if active is None:
        return sample_polya_gamma_1(eta, rng)
    omega = np.zeros_like(eta)
    if active.any():
        omega[active] = sample_polya_gamma_1(eta[active], rng)
    return omega


def _safe_div(num, den):
    out = np.zeros_like(num, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


class CollapsedGaussian:
    """Factorization of ``C = lam R + Omega^{-1}`` over the observed coordinates.

    The dense form works with ``B = I + lam D R D`` where ``D = Omega^{1/2}``,
    so ``Omega^{-1}`` is never formed.  The low-rank form uses the Woodbury
    identity on ``R = Phi Phi' + diag(d)``.
    """

    def __init__(self, lam, omega, R, low_rank=False):
        self.lam = float(lam)
        self.omega = np.asarray(omega, dtype=float)
        self.active = self.omega > 0
        self.R = R
        self.low_rank = bool(low_rank and R.is_low_rank)
        w = self.omega
        log_w = np.log(w[self.active]).sum()
        if self.low_rank:
            phi = R.factor
            d = np.zeros(R.n) if R.remainder is None else R.remainder
            self._scale = 1.0 + self.lam * d * w
            self._dinv = w / self._scale
            k = np.eye(phi.shape[1]) + self.lam * phi.T @ (self._dinv[:, None] * phi)
            self._kchol = np.linalg.cholesky(k)
            self.logdet = np.log(self._scale[self.active]).sum() - log_w + 2.0 * np.log(np.diag(self._kchol)).sum()
        else:
            self._sqrt_w = np.sqrt(w)
            b = self.lam * (self._sqrt_w[:, None] * R.dense * self._sqrt_w[None, :])
            b[np.diag_indices_from(b)] += 1.0
            self._bchol, _ = cholesky_jitter(b)
            self.logdet = 2.0 * np.log(np.diag(self._bchol)).sum() - log_w

    def _k_solve(self, v):
        return linalg.cho_solve((self._kchol, True), v)

    def solve(self, v):
        """``C^{-1} v`` (rows of ``v`` on unobserved coordinates are ignored)."""
        if self.low_rank:
            phi = self.R.factor
            dv = self._dinv[:, None] * v if v.ndim == 2 else self._dinv * v
            corr = phi @ self._k_solve(phi.T @ dv)
            corr = self._dinv[:, None] * corr if v.ndim == 2 else self._dinv * corr
            return dv - self.lam * corr
        sw = self._sqrt_w[:, None] if v.ndim == 2 else self._sqrt_w
        x = linalg.cho_solve((self._bchol, True), sw * v)
        return sw * x

    def solve_scaled(self, t):
        """``C^{-1} Omega^{-1} t`` for a vector ``t`` that vanishes off the observed set."""
        if self.low_rank:
            phi = self.R.factor
            u = t / self._scale
            return u - self.lam * self._dinv * (phi @ self._k_solve(phi.T @ u))
        s = _safe_div(t, self._sqrt_w)
        return self._sqrt_w * linalg.cho_solve((self._bchol, True), s)

    def log_density(self, t):
        """``log N(Omega^{-1} kappa; mean, C)`` given ``t = kappa - Omega mean``."""
        n_obs = int(self.active.sum())
        if n_obs == 0:
            return 0.0
        if self.low_rank:
            phi = self.R.factor
            u = t / self._scale
            g = linalg.solve_triangular(self._kchol, phi.T @ u, lower=True)
            quad = np.sum(_safe_div(t * t, self.omega * self._scale)) - self.lam * (g @ g)
        else:
            y = linalg.solve_triangular(self._bchol, _safe_div(t, self._sqrt_w), lower=True)
            quad = y @ y
        return -0.5 * (n_obs * _LOG_2PI + self.logdet + quad)

    def apply_r(self, v):
        """``R v`` using the factor when available."""
        if self.low_rank:
            out = self.R.factor @ (self.R.factor.T @ v)
            if self.R.remainder is not None:
                out = out + (self.R.remainder[:, None] if v.ndim == 2 else self.R.remainder) * v
            return out
        return self.R.dense @ v


def _kappa(z, omega):
    return np.where(omega > 0, np.asarray(z, float) - 0.5, 0.0)


def _as_corr(R):
    return R if isinstance(R, CorrelationMatrix) else CorrelationMatrix(np.atleast_2d(np.asarray(R, float)))


def collapsed_lambda_log_likelihood(lam, omega, z, R, shape, low_rank=False):
    """``log N(Omega^{-1} kappa; 0.5 lam (a-b) 1, lam R + Omega^{-1})``, kappa = z - 1/2.

    Coordinates with ``omega == 0`` are treated as unobserved.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    p = as_lb_params(shape)
    omega = np.asarray(omega, dtype=float)
    cg = CollapsedGaussian(lam, omega, _as_corr(R), low_rank)
    return cg.log_density(_kappa(z, omega) - p.location(lam) * omega)


def _proposal_mean(a_prime, total):
    d = 2.0 * a_prime - total
    if abs(d) < 1e-12:
        return 2.0 * trigamma(0.5 * total)
    return 2.0 * (digamma(a_prime) - digamma(total - a_prime)) / d


def adaptive_proposal(shape, lam_bar):
    """Moment-matched Polya proposal ``(a', a + b - a')`` with ``a' <= b'``."""
    p = as_lb_params(shape)
    c = p.a + p.b
    if not lam_bar > 0:
        raise ValueError("lam_bar must be positive")
    if lam_bar <= 2.0 * trigamma(0.5 * c):
        return PolyaParams(0.5 * c, 0.5 * c)
    # the mean is decreasing on (0, c/2], so the root is bracketed
    root = optimize.brentq(lambda x: _proposal_mean(x, c) - lam_bar, 1e-8, 0.5 * c, xtol=1e-12, rtol=1e-14)
    return PolyaParams(root, c - root)


def _tilt(shape, proposal):
    p = as_lb_params(shape)
    return 0.5 * (p.a * p.b - proposal.a * proposal.b)


def step_lambda_mh(lam, log_lik, shape, proposal, rng, truncation=DEFAULT_TRUNCATION, current_log_lik=None):
    """Independence Metropolis-Hastings move for ``lam``.

    ``log_lik`` maps ``lam`` to the log of the tilting likelihood.  The
    proposal is ``Polya(proposal)``; the Polya densities cancel through the
    equal-sum identity, leaving only an exponential tilt.

    Returns ``(lam, accepted)``.
    """
    cand = sample_polya(proposal, rng, truncation=truncation)
    cur = log_lik(lam) if current_log_lik is None else current_log_lik
    log_alpha = (lam - cand) * _tilt(shape, proposal) + log_lik(cand) - cur
    if log_alpha >= 0 or math.log(rng.random()) < log_alpha:
        return cand, True
    return lam, False


def step_lambda_particle_gibbs(lam, log_lik, shape, proposal, n_particles, rng, truncation=DEFAULT_TRUNCATION):
    """Particle Gibbs move: ``n_particles`` fresh candidates plus the current value.

    Returns ``(lam, accepted)`` where ``accepted`` means a fresh candidate won.
    """
    cands = np.append(sample_polya(proposal, rng, size=n_particles, truncation=truncation), lam)
    logw = np.array([-c * _tilt(shape, proposal) + log_lik(c) for c in cands])
    prob = np.exp(logw - log_sum_exp(logw))
    k = int(rng.choice(len(cands), p=prob / prob.sum()))
    return float(cands[k]), k < n_particles


def _prior_root_draw(R, rng, chol=None):
    """One draw from N(0, R)."""
    if R.is_low_rank:
        out = R.factor @ rng.standard_normal(R.factor.shape[1])
        if not R.is_exact_factor:
            out += np.sqrt(R.remainder) * rng.standard_normal(R.n)
        return out
    if chol is None:
        chol, _ = cholesky_jitter(R.dense)
    return chol @ rng.standard_normal(R.n)


def _gamma_system(lam, omega, z, R, shape):
    p = as_lb_params(shape)
    phi = R.factor
    k = np.eye(phi.shape[1]) + lam * phi.T @ (omega[:, None] * phi)
    kchol = np.linalg.cholesky(k)
    rhs = math.sqrt(lam) * phi.T @ (_kappa(z, omega) - p.location(lam) * omega)
    return kchol, linalg.cho_solve((kchol, True), rhs)


def step_eta(lam, omega, z, R, shape, rng, path="full", collapsed=None, chol=None):
    """Draw ``eta`` from its Gaussian conditional given ``lam`` and ``omega``.

    ``path="low"`` (feature-map kernels) samples the ``q`` coefficients
    ``gamma`` and returns ``(eta, gamma)``.  ``path="full"`` updates a prior
    draw through the factorization of ``lam R + Omega^{-1}`` (reusing
    ``collapsed`` when given) and returns ``(eta, None)``; this is an exact
    draw from the same conditional and also works for rank-deficient ``R``.
    """
    p = as_lb_params(shape)
    R = _as_corr(R)
    omega = np.asarray(omega, dtype=float)
    m = p.location(lam)
    if path == "low":
        if not R.is_exact_factor:
            raise ValueError("the coefficient path needs an exact low-rank factor")
        kchol, mean = _gamma_system(lam, omega, z, R, shape)
        gamma = mean + linalg.solve_triangular(kchol.T, rng.standard_normal(len(mean)), lower=False)
        return m + math.sqrt(lam) * (R.factor @ gamma), gamma
    if path != "full":
        raise ValueError(f"unknown path {path!r}")
    cg = collapsed if collapsed is not None else CollapsedGaussian(lam, omega, R, R.is_low_rank)
    prior = m + math.sqrt(lam) * _prior_root_draw(R, rng, chol)
    noise = np.sqrt(omega) * rng.standard_normal(R.n)
    t = np.where(omega > 0, _kappa(z, omega) - omega * prior - noise, 0.0)
    return prior + lam * cg.apply_r(cg.solve_scaled(t)), None


def eta_conditional_moments(lam, omega, z, R, shape, path="full"):
    """Mean and covariance of ``eta`` given ``lam``, ``omega`` and ``z``."""
    p = as_lb_params(shape)
    R = _as_corr(R)
    omega = np.asarray(omega, dtype=float)
    m = p.location(lam)
    if path == "low":
        kchol, mean_g = _gamma_system(lam, omega, z, R, shape)
        phi = R.factor
        mean = m + math.sqrt(lam) * phi @ mean_g
        cov = lam * phi @ linalg.cho_solve((kchol, True), phi.T)
        return mean, cov
    cg = CollapsedGaussian(lam, omega, R, low_rank=(path == "woodbury"))
    lr = lam * (R.dense if not cg.low_rank else cg.apply_r(np.eye(R.n)))
    mean = m + lam * cg.apply_r(cg.solve_scaled(_kappa(z, omega) - m * omega))
    cov = lr - lr @ cg.solve(lr)
    return mean, 0.5 * (cov + cov.T)


def _gaussian_logpdf_chol(resid, chol, scale):
    """log N(resid; 0, scale * L L') up to the 2 pi term."""
    w = linalg.solve_triangular(chol, resid, lower=True)
    n = len(resid)
    return -np.log(np.diag(chol)).sum() - 0.5 * n * math.log(scale) - 0.5 * (w @ w) / scale


def step_kernel_params(eta, lam, shape, chols, log_prior, rng):
    """Draw a grid index from the discrete full conditional of the kernel range.

    ``chols[g]`` is the Cholesky factor of the correlation matrix at grid
    value ``g`` and ``log_prior[g]`` its log prior weight.
    """
    if len(chols) == 1:
        return 0
    resid = np.asarray(eta, float) - as_lb_params(shape).location(lam)
    logp = np.array([lp + _gaussian_logpdf_chol(resid, c, lam) for c, lp in zip(chols, log_prior)])
    prob = np.exp(logp - log_sum_exp(logp))
    return int(rng.choice(len(chols), p=prob / prob.sum()))


def step_ab_pmmh(ab, particles, index, log_lik_for, log_prior, step, rng, truncation=DEFAULT_TRUNCATION):
    """Particle marginal Metropolis-Hastings update of ``(a, b, lam)``.

    ``log_lik_for(shape)`` returns a function ``lam -> log L(lam)`` under
    that shape.  The proposal is a Gaussian random walk on ``(log a, log b)``
    with standard deviation ``step``; its Jacobian enters the ratio.

    Returns ``(ab, particles, index, accepted)``.
    """
    ab = as_lb_params(ab)
    n = len(particles)
    a_new = ab.a * math.exp(step * rng.standard_normal())
    b_new = ab.b * math.exp(step * rng.standard_normal())
    lp_new = log_prior(a_new, b_new)
    if not np.isfinite(lp_new):
        return ab, particles, index, False
    new_shape = LBParams(a_new, b_new)
    new_particles = sample_polya(new_shape.polya, rng, size=n, truncation=truncation)
    ll_new_fn = log_lik_for(new_shape)
    ll_cur_fn = log_lik_for(ab)
    ll_new = np.array([ll_new_fn(x) for x in new_particles])
    ll_cur = np.array([ll_cur_fn(x) for x in particles])
    log_alpha = (
        lp_new - log_prior(ab.a, ab.b)
        + log_sum_exp(ll_new) - log_sum_exp(ll_cur)
        + math.log(a_new * b_new) - math.log(ab.a * ab.b)
    )
    if log_alpha >= 0 or math.log(rng.random()) < log_alpha:
        prob = np.exp(ll_new - log_sum_exp(ll_new))
        k = int(rng.choice(n, p=prob / prob.sum()))
        return new_shape, new_particles, k, True
    return ab, particles, index, False


# ---------------------------------------------------------------------------
# sampler
# ---------------------------------------------------------------------------


class BinarySampler:
    """One-cycle Gibbs kernel for a fixed design, with cached matrix factors."""

    def __init__(self, config, points, R=None):
        self.config = config
        self.points = np.asarray(points, dtype=float)
        self.low_rank = config.rank == "low"
        if config.range_grid is not None:
            self.grid = np.asarray(config.range_grid, dtype=float)
            prior = np.ones(len(self.grid)) if config.range_prior is None else np.asarray(config.range_prior, float)
            self.log_prior = np.log(prior / prior.sum())
            self._grid_cache = {}
            self.set_range(len(self.grid) // 2)
        else:
            self.grid = None
            self.R = build_matrix(config.kernel, self.points) if R is None else R
            self._chol = None
        if self.low_rank and not self.R.is_low_rank:
            raise ValueError("rank='low' needs a kernel with a low-rank factor")

    # matrices -------------------------------------------------------------
    def _grid_entry(self, g):
        if g not in self._grid_cache:
            kernel = self.config.kernel.with_range(self.grid[g])
            R = build_matrix(kernel, self.points)
            self._grid_cache[g] = (R, cholesky_jitter(R.dense)[0])
        return self._grid_cache[g]

    def set_range(self, g):
        self.range_index = g
        self.R, self._chol = self._grid_entry(g)

    @property
    def chol(self):
        if self._chol is None:
            if self.R.is_exact_factor:
                raise ValueError("correlation matrix is rank deficient; use the blocked sampler")
            self._chol = cholesky_jitter(self.R.dense)[0]
        return self._chol

    @property
    def current_range(self):
        return None if self.grid is None else float(self.grid[self.range_index])

    # state ----------------------------------------------------------------
    def initial_state(self, rng):
        shape = self.config.shape
        lam = polya_mean(shape.polya)
        eta = np.full(len(self.points), shape.location(lam))
        return BinaryRegressionState(
            eta=eta, lam=lam, omega=np.full(len(eta), 0.25), ab=shape,
            rho=self.current_range, lam_bar=lam, m=1,
        )

    def _proposal(self, state):
        if self.config.adapted:
            return adaptive_proposal(state.ab, state.lam_bar)
        return state.ab.polya

    # one cycle ------------------------------------------------------------
    def cycle(self, state, z, rng, active=None, counters=None):
        """Advance ``state`` by one Gibbs cycle in place and return it."""
        cfg = self.config
        counters = counters if counters is not None else {}
        if active is None:
            active = np.ones(len(z), dtype=bool)
        state.omega = step_pg(state.eta, rng, active)
        cache = {}

        def log_lik_for(shape):
            def f(lam):
                key = (lam, shape.a, shape.b)
                if key not in cache:
                    cg = CollapsedGaussian(lam, state.omega, self.R, self.low_rank)
                    cache[key] = (cg, cg.log_density(_kappa(z, state.omega) - shape.location(lam) * state.omega))
                return cache[key][1]
            return f

        if cfg.ab_log_prior is not None:
            if state.particles is None:
                extra = sample_polya(state.ab.polya, rng, size=cfg.pmmh_particles - 1, truncation=cfg.truncation)
                state.particles = np.append(state.lam, extra)
                state.particle_index = 0
            state.ab, state.particles, state.particle_index, acc = step_ab_pmmh(
                state.ab, state.particles, state.particle_index, log_lik_for, cfg.ab_log_prior,
                cfg.ab_step, rng, cfg.truncation,
            )
            state.lam = float(state.particles[state.particle_index])
            _count(counters, "ab", acc)

        proposal = self._proposal(state)
        if cfg.blocked:
            ll = log_lik_for(state.ab)
            if cfg.lambda_sampler == "particle_gibbs":
                lam, acc = step_lambda_particle_gibbs(state.lam, ll, state.ab, proposal, cfg.particles, rng, cfg.truncation)
            else:
                lam, acc = step_lambda_mh(state.lam, ll, state.ab, proposal, rng, cfg.truncation)
        else:
            lam, acc = self._nonblocked_lambda(state, proposal, rng)
        state.lam = float(lam)
        _count(counters, "lambda", acc)
        if state.particles is not None:
            state.particles[state.particle_index] = state.lam
        state.lam_bar = state.lam_bar * state.m / (state.m + 1) + state.lam / (state.m + 1)
        state.m += 1

        if self.low_rank and self.R.is_exact_factor:
            state.eta, state.gamma = step_eta(state.lam, state.omega, z, self.R, state.ab, rng, path="low")
        else:
            key = (state.lam, state.ab.a, state.ab.b)
            cg = cache[key][0] if key in cache else None
            chol = None if self.R.is_low_rank else self.chol
            state.eta, _ = step_eta(state.lam, state.omega, z, self.R, state.ab, rng, "full", cg, chol)

        if self.grid is not None:
            chols = [self._grid_entry(g)[1] for g in range(len(self.grid))]
            g = step_kernel_params(state.eta, state.lam, state.ab, chols, self.log_prior, rng)
            self.set_range(g)
            state.rho = self.current_range
        return state

    def _nonblocked_lambda(self, state, proposal, rng):
        chol = self.chol
        w = linalg.solve_triangular(chol, state.eta, lower=True)
        v = linalg.solve_triangular(chol, np.ones(len(state.eta)), lower=True)
        n = len(state.eta)

        def ll(lam):
            r = w - state.ab.location(lam) * v
            return -0.5 * n * math.log(lam) - 0.5 * (r @ r) / lam

        return step_lambda_mh(state.lam, ll, state.ab, proposal, rng, self.config.truncation)


def _count(counters, key, accepted):
    acc, tries = counters.get(key, (0, 0))
    counters[key] = (acc + int(bool(accepted)), tries + 1)


def run_chain(config, data, rng=None):
    """Run the sampler for ``config.iterations`` cycles and keep the post-burn-in draws."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    sampler = BinarySampler(config, data.points)
    state = sampler.initial_state(rng)
    keep = config.iterations - config.burn_in
    n = data.n
    eta = np.empty((keep, n))
    lam = np.empty(keep)
    rho = np.empty(keep) if sampler.grid is not None else None
    ab = np.empty((keep, 2)) if config.ab_log_prior is not None else None
    gamma = None
    counters = {}
    start = time.perf_counter()
    for it in range(config.iterations):
        try:
            sampler.cycle(state, data.z, rng, counters=counters)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            raise SamplerError(str(exc), it) from exc
        j = it - config.burn_in
        if j >= 0:
            eta[j] = state.eta
            lam[j] = state.lam
            if rho is not None:
                rho[j] = state.rho
            if ab is not None:
                ab[j] = (state.ab.a, state.ab.b)
            if state.gamma is not None:
                if gamma is None:
                    gamma = np.empty((keep, len(state.gamma)))
                gamma[j] = state.gamma
    elapsed = time.perf_counter() - start
    return ChainOutput(
        eta=eta, lam=lam, rho=rho, ab=ab, gamma=gamma,
        accepted={k: v[0] for k, v in counters.items()},
        attempts={k: v[1] for k, v in counters.items()},
        elapsed=elapsed, seed=config.seed,
    )


def _conditional_operator(kernel, train, new):
    """``A = R_nt R_tt^{-1}`` and a square root of ``R_nn - A R_tn``."""
    R_tt = build_matrix(kernel, train).dense
    R_nt = cross_matrix(kernel, new, train)
    chol, _ = cholesky_jitter(R_tt)
    A = linalg.cho_solve((chol, True), R_nt.T).T
    S = build_matrix(kernel, new).dense - A @ R_nt.T
    vals, vecs = linalg.eigh(0.5 * (S + S.T))
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return A, root


def predict_probabilities(chain, config, train_points, new_points, rng=None, levels=(0.025, 0.975)):
    """Pointwise posterior summaries of ``logistic(eta(x*))``.

    For each retained draw the field at ``new_points`` is sampled from its
    Gaussian conditional given the draw's ``eta`` and ``lam``.  Returns a
    dict with ``mean``, ``lower``, ``upper`` and the raw ``draws``.
    """
    rng = np.random.default_rng(config.seed + 1) if rng is None else rng
    new = np.asarray(new_points, dtype=float)
    n_new = len(new)
    out = np.empty((chain.draws, n_new))
    cfg_shape = as_lb_params(config.shape)
    if chain.gamma is not None and config.rank == "low":
        phi = build_matrix(config.kernel, new).factor
        for j in range(chain.draws):
            shape = cfg_shape if chain.ab is None else LBParams(*chain.ab[j])
            out[j] = shape.location(chain.lam[j]) + math.sqrt(chain.lam[j]) * phi @ chain.gamma[j]
    else:
        ops = {}
        for j in range(chain.draws):
            shape = cfg_shape if chain.ab is None else LBParams(*chain.ab[j])
            kernel = config.kernel if chain.rho is None else config.kernel.with_range(chain.rho[j])
            if kernel not in ops:
                ops[kernel] = _conditional_operator(kernel, train_points, new)
            A, root = ops[kernel]
            m = shape.location(chain.lam[j])
            mean = m + A @ (chain.eta[j] - m)
            out[j] = mean + math.sqrt(chain.lam[j]) * (root @ rng.standard_normal(root.shape[1]))
    prob = logistic(out)
    return {
        "mean": prob.mean(axis=0),
        "lower": np.quantile(prob, levels[0], axis=0),
        "upper": np.quantile(prob, levels[1], axis=0),
        "draws": prob,
    }
