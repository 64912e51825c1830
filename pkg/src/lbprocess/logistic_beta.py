"""Univariate and multivariate logistic-beta laws and logistic-beta processes.

A multivariate logistic-beta vector is a normal variance-mean mixture::

    lam ~ Polya(a, b),    eta | lam ~ N(0.5 * lam * (a - b) * 1, lam * R)

so that ``logistic(eta_i)`` is Beta(a, b) for every coordinate.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .kernels import CorrelationMatrix, FeatureMap, build_matrix, cholesky_jitter, cross_matrix
from .polya import DEFAULT_TRUNCATION, PolyaParams, sample_polya
from .special_math import digamma, log_beta, log_logistic, trigamma

__all__ = [
    "LBParams",
    "MVLBSample",
    "LBPRealization",
    "lb_log_density",
    "sample_mvlb",
    "mvlb_moments",
    "corr_range",
    "sample_lbp",
    "lbp_conditional_gaussian",
    "beta_cdf",
]

_EQUAL_SHAPES = 1e-9


@dataclass(frozen=True)
class LBParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"shapes must be positive, got ({self.a}, {self.b})")

    @property
    def polya(self):
        return PolyaParams(self.a, self.b)

    def location(self, lam):
        """Conditional mean ``0.5 * lam * (a - b)`` of each coordinate given lam."""
        return 0.5 * lam * (self.a - self.b)


def as_lb_params(params):
    if isinstance(params, LBParams):
        return params
    a, b = params
    return LBParams(float(a), float(b))


@dataclass(frozen=True)
class MVLBSample:
    eta: np.ndarray
    lam: np.ndarray | float


@dataclass(frozen=True)
class LBPRealization:
    points: np.ndarray
    eta: np.ndarray
    kernel: object
    lam: float
    params: LBParams
    gamma: np.ndarray | None = None


def lb_log_density(eta, params):
    """Log density ``a log s(eta) + b log s(-eta) - log B(a, b)``."""
    p = as_lb_params(params)
    eta = np.asarray(eta, dtype=float)
    out = np.asarray(p.a * log_logistic(eta) + p.b * log_logistic(-eta) - log_beta(p.a, p.b))
    return float(out) if out.ndim == 0 else out


def beta_cdf(x, a, b):
    """Beta(a, b) distribution function (regularized incomplete beta)."""
    return special.betainc(a, b, np.clip(x, 0.0, 1.0))


def _as_corr(R):
    if isinstance(R, CorrelationMatrix):
        return R
    return CorrelationMatrix(np.atleast_2d(np.asarray(R, dtype=float)))


def _gaussian_part(R, rng, count):
    """``count`` draws of N(0, R) as rows; uses the factor when R has one."""
    n = R.n
    if R.is_low_rank:
        phi = R.factor
        out = rng.standard_normal((count, phi.shape[1])) @ phi.T
        if not R.is_exact_factor:
            out += rng.standard_normal((count, n)) * np.sqrt(R.remainder)
        return out
    chol, _ = cholesky_jitter(R.dense)
    return rng.standard_normal((count, n)) @ chol.T


def sample_mvlb(params, R, rng, size=None, truncation=DEFAULT_TRUNCATION):
    """Draw multivariate logistic-beta vectors with correlation matrix ``R``.

    With ``size=None`` returns one draw (``eta`` of shape ``(n,)``); otherwise
    ``eta`` has shape ``(size, n)`` and ``lam`` shape ``(size,)``.
    """
    p = as_lb_params(params)
    R = _as_corr(R)
    count = 1 if size is None else int(size)
    lam = sample_polya(p.polya, rng, size=count, truncation=truncation)
    z = _gaussian_part(R, rng, count)
    eta = p.location(lam)[:, None] + np.sqrt(lam)[:, None] * z
    if size is None:
        return MVLBSample(eta[0], float(lam[0]))
    return MVLBSample(eta, lam)


def mvlb_moments(params, r_ij):
    """Mean, variance and the covariance at correlation ``r_ij``."""
    p = as_lb_params(params)
    if not -1.0 <= r_ij <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    mean = digamma(p.a) - digamma(p.b)
    var = trigamma(p.a) + trigamma(p.b)
    if abs(p.a - p.b) < _EQUAL_SHAPES:
        cov = 2.0 * trigamma(p.a) * r_ij
    else:
        cov = var + 2.0 * (r_ij - 1.0) * mean / (p.a - p.b)
    return mean, var, cov


def corr_range(params):
    """Attainable range of corr(eta_i, eta_j) as the kernel correlation varies."""
    p = as_lb_params(params)
    if abs(p.a - p.b) < _EQUAL_SHAPES:
        return -1.0, 1.0
    dpsi = digamma(p.a) - digamma(p.b)
    lower = 1.0 - 4.0 * dpsi / ((p.a - p.b) * (trigamma(p.a) + trigamma(p.b)))
    return lower, 1.0


def sample_lbp(params, kernel, points, rng, size=None, representation="hierarchical",
               truncation=DEFAULT_TRUNCATION):
    """Realize a logistic-beta process at ``points``.

    Feature-map kernels go through the hierarchical form
    ``eta = 0.5 lam (a-b) 1 + sqrt(lam) Phi gamma`` and keep ``gamma``.
    ``representation="linear_predictor"`` instead draws
    ``beta ~ LB(a, b, I_q)`` and returns
    ``{psi(a) - psi(b)} (1 - Phi 1_q) + Phi beta`` (feature maps only;
    ``lam`` is nan and ``gamma`` holds ``beta``).  The offset uses E(lam) in
    place of lam, so the two forms share means for all shapes but share
    covariances only when ``a == b`` or the rows of ``Phi`` sum to one.

    With ``size`` set, returns a list of realizations sharing ``points``.
    """
    p = as_lb_params(params)
    pts = np.asarray(points, dtype=float)
    R = build_matrix(kernel, pts)
    count = 1 if size is None else int(size)

    if representation == "linear_predictor":
        if not isinstance(kernel, FeatureMap):
            raise ValueError("linear-predictor representation needs a feature-map kernel")
        phi = R.factor
        q = phi.shape[1]
        # beta ~ LB(a, b, I_q): one lam shared by the q coefficients
        lam_q = sample_polya(p.polya, rng, size=count, truncation=truncation)[:, None]
        beta = p.location(lam_q) + np.sqrt(lam_q) * rng.standard_normal((count, q))
        offset = (digamma(p.a) - digamma(p.b)) * (1.0 - phi.sum(axis=1))
        eta = offset[None, :] + beta @ phi.T
        out = [LBPRealization(pts, eta[i], kernel, float("nan"), p, beta[i]) for i in range(count)]
    elif representation == "hierarchical":
        lam = sample_polya(p.polya, rng, size=count, truncation=truncation)
        if R.is_exact_factor:
            gamma = rng.standard_normal((count, R.factor.shape[1]))
            eta = p.location(lam)[:, None] + np.sqrt(lam)[:, None] * (gamma @ R.factor.T)
        else:
            gamma = [None] * count
            eta = p.location(lam)[:, None] + np.sqrt(lam)[:, None] * _gaussian_part(R, rng, count)
        out = [LBPRealization(pts, eta[i], kernel, float(lam[i]), p, gamma[i]) for i in range(count)]
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return out[0] if size is None else out


def lbp_conditional_gaussian(realized, new_points):
    """Gaussian law of eta at ``new_points`` given a realization (and its lam).

    When the realization carries ``gamma`` from a feature-map kernel the
    field is a deterministic function of it, so the mean is exact and the
    covariance is zero.  Otherwise the usual Gaussian conditioning is applied
    to the joint ``N(m 1, lam R)``.
    """
    p = realized.params
    lam = realized.lam
    m = p.location(lam)
    new = np.asarray(new_points, dtype=float)
    if realized.gamma is not None and isinstance(realized.kernel, FeatureMap):
        phi_new = realized.kernel.features(new)
        mean = m + np.sqrt(lam) * phi_new @ realized.gamma
        return mean, np.zeros((len(mean), len(mean)))
    kernel = realized.kernel
    r_tt = build_matrix(kernel, realized.points).dense
    r_nt = cross_matrix(kernel, new, realized.points)
    r_nn = build_matrix(kernel, new).dense
    chol, _ = cholesky_jitter(r_tt)
    solved = linalg.cho_solve((chol, True), np.column_stack([realized.eta - m, r_nt.T]))
    mean = m + r_nt @ solved[:, 0]
    cov = lam * (r_nn - r_nt @ solved[:, 1:])
    cov = 0.5 * (cov + cov.T)
    return mean, cov
