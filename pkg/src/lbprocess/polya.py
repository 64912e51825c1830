"""Polya mixing distribution and the Polya-Gamma PG(1, c) sampler.

``Polya(a, b)`` is the law of ``sum_k 2 e_k / ((k + a)(k + b))`` with i.i.d.
standard exponential ``e_k``.  It is the mixing variable of the normal
variance-mean representation of the logistic-beta distribution.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .special_math import digamma, log_beta, polygamma3, trigamma

__all__ = [
    "PolyaParams",
    "PolyaDraw",
    "DEFAULT_TRUNCATION",
    "sample_polya",
    "polya_tail_mean",
    "polya_log_density",
    "polya_identity_log_factor",
    "polya_moments",
    "polya_mean",
    "sample_polya_gamma_1",
]

DEFAULT_TRUNCATION = 200
_EQUAL_SHAPES = 1e-9


@dataclass(frozen=True)
class PolyaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Polya shapes must be positive, got ({self.a}, {self.b})")

    @property
    def total(self):
        return self.a + self.b


@dataclass(frozen=True)
class PolyaDraw:
    lam: np.ndarray | float
    truncation_terms: int


def _as_params(params):
    if isinstance(params, PolyaParams):
        return params
    a, b = params
    return PolyaParams(float(a), float(b))


def polya_tail_mean(params, start):
    """Exact mean of the omitted tail ``sum_{k >= start} 2 / ((k+a)(k+b))``."""
    p = _as_params(params)
    if abs(p.a - p.b) < _EQUAL_SHAPES:
        return 2.0 * trigamma(start + 0.5 * (p.a + p.b))
    return 2.0 * (digamma(start + p.a) - digamma(start + p.b)) / (p.a - p.b)


def _weights(p, truncation):
    k = np.arange(truncation, dtype=float)
    return 2.0 / ((k + p.a) * (k + p.b))


def sample_polya(params, rng, size=None, truncation=DEFAULT_TRUNCATION, chunk=20000):
    """Draw from Polya(a, b) by the truncated exponential sum.

    The first ``truncation`` terms are sampled and the remaining tail is
    replaced by its exact expectation, so the draw is unbiased in mean.

    Returns a float when ``size`` is None, otherwise an array of shape ``size``.
    """
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    p = _as_params(params)
    w = _weights(p, truncation)
    tail = polya_tail_mean(p, truncation)
    if size is None:
        return float(rng.standard_exponential(truncation) @ w + tail)
    shape = (size,) if np.ndim(size) == 0 else tuple(size)
    total = int(np.prod(shape))
    out = np.empty(total)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        out[start:stop] = rng.standard_exponential((stop - start, truncation)) @ w
    out += tail
    return out.reshape(shape)


def polya_log_density(lam, params, tol=1e-12, max_terms=10_000, max_rel_error=1e-8):
    """Log density of Polya(a, b) at ``lam`` from its alternating series.

    Terms are accumulated (scaled by the largest one, summed with ``fsum``)
    until the magnitudes are decreasing and the next term is below ``tol``
    relative to the running sum.

    Returns ``(log_density, converged)``.  ``converged`` is False, and the
    value ``nan``, when the budget of ``max_terms`` runs out or when
    cancellation between alternating terms leaves an estimated relative
    error above ``max_rel_error`` (the small-``lam`` regime).
    """
    p = _as_params(params)
    if not lam > 0:
        raise ValueError("lam must be positive")
    c = p.a + p.b
    ks = np.arange(max_terms, dtype=float)
    log_mag = (
        special.gammaln(c + ks)
        - special.gammaln(ks + 1.0)
        - math.lgamma(c)
        + np.log(ks + 0.5 * c)
        - log_beta(p.a, p.b)
        - 0.5 * (ks + p.a) * (ks + p.b) * lam
    )
    peak = float(log_mag.max())
    terms = np.exp(log_mag - peak)
    terms[1::2] *= -1.0
    running = np.cumsum(terms)
    decreasing = np.diff(log_mag) < 0
    small = np.abs(terms[1:]) < tol * np.abs(running[:-1])
    stop = np.flatnonzero(decreasing & small & (ks[:-1] >= np.argmax(log_mag)))
    if stop.size == 0:
        return math.nan, False
    used = terms[: stop[0] + 1]
    total = math.fsum(used.tolist())
    rel_err = 4.0 * np.finfo(float).eps * np.sum(np.abs(used)) / abs(total) if total != 0 else math.inf
    if total <= 0 or rel_err > max_rel_error:
        return math.nan, False
    return math.log(total) + peak, True


def polya_identity_log_factor(lam, source, target):
    """log[pi(lam; target) / pi(lam; source)] for shape pairs with equal sums."""
    s = _as_params(source)
    t = _as_params(target)
    if abs(s.total - t.total) > 1e-12 * max(1.0, s.total):
        raise ValueError(f"shape sums differ: {s.total} vs {t.total}")
    return log_beta(s.a, s.b) - log_beta(t.a, t.b) + 0.5 * lam * (s.a * s.b - t.a * t.b)


def polya_mean(params):
    p = _as_params(params)
    if abs(p.a - p.b) < _EQUAL_SHAPES:
        return 2.0 * trigamma(0.5 * (p.a + p.b))
    return 2.0 * (digamma(p.a) - digamma(p.b)) / (p.a - p.b)


def polya_moments(params):
    """Closed-form ``(mean, variance)`` of Polya(a, b)."""
    p = _as_params(params)
    if abs(p.a - p.b) < _EQUAL_SHAPES:
        m = 0.5 * (p.a + p.b)
        return 2.0 * trigamma(m), 2.0 * polygamma3(m) / 3.0
    d = p.a - p.b
    dpsi = digamma(p.a) - digamma(p.b)
    mean = 2.0 * dpsi / d
    var = 4.0 / d**2 * (trigamma(p.a) + trigamma(p.b) - 2.0 * dpsi / d)
    return mean, var


# ---------------------------------------------------------------------------
# Polya-Gamma PG(1, c): Devroye's alternating-series rejection sampler
# ---------------------------------------------------------------------------

_T = 0.64
_PI2_8 = np.pi**2 / 8.0


def _coef(n, x):
    """Piecewise series coefficient a_n(x) of the Jacobi density."""
    n_half = n + 0.5
    out = np.empty_like(x)
    left = x <= _T
    xl = x[left]
    out[left] = np.pi * n_half * (2.0 / (np.pi * xl)) ** 1.5 * np.exp(-2.0 * n_half**2 / xl)
    xr = x[~left]
    out[~left] = np.pi * n_half * np.exp(-0.5 * n_half**2 * np.pi**2 * xr)
    return out


def _inv_gauss_cdf(t, z):
    # CDF at t of the inverse Gaussian with mean 1/z and shape 1
    rt = 1.0 / np.sqrt(t)
    return special.ndtr(rt * (t * z - 1.0)) + np.exp(2.0 * z) * special.ndtr(-rt * (t * z + 1.0))


def _truncated_inv_gauss(z, rng):
    """Draws from IG(1/z, 1) restricted to (0, T), one per entry of ``z``."""
    out = np.empty_like(z)
    todo = np.arange(z.size)
    while todo.size:
        zt = z[todo]
        x = np.empty(zt.size)
        big_mean = zt < 1.0 / _T
        # mean beyond T: chi-square style proposal with exponential tilt acceptance
        idx = np.flatnonzero(big_mean)
        if idx.size:
            pending = idx.copy()
            while pending.size:
                e1 = rng.standard_exponential(pending.size)
                e2 = rng.standard_exponential(pending.size)
                ok = e1 * e1 <= 2.0 * e2 / _T
                x[pending[ok]] = _T / (1.0 + _T * e1[ok]) ** 2
                pending = pending[~ok]
            alpha = np.exp(-0.5 * zt[idx] ** 2 * x[idx])
            x[idx] = np.where(rng.random(idx.size) <= alpha, x[idx], np.inf)
        idx = np.flatnonzero(~big_mean)
        if idx.size:
            mu = 1.0 / zt[idx]
            y = rng.standard_normal(idx.size) ** 2
            muy = mu * y
            cand = mu + 0.5 * mu * muy - 0.5 * mu * np.sqrt(4.0 * muy + muy * muy)
            flip = rng.random(idx.size) > mu / (mu + cand)
            cand[flip] = mu[flip] ** 2 / cand[flip]
            x[idx] = cand
        good = x < _T
        out[todo[good]] = x[good]
        todo = todo[~good]
    return out


def sample_polya_gamma_1(c, rng):
    """Exact draws from PG(1, c), elementwise over ``c``.

    Returns a float for scalar ``c`` and an array of matching shape otherwise.
    """
    scalar = np.ndim(c) == 0
    c = np.atleast_1d(np.asarray(c, dtype=float))
    shape = c.shape
    z = 0.5 * np.abs(c.ravel())
    big_k = _PI2_8 + 0.5 * z * z
    p = np.pi / (2.0 * big_k) * np.exp(-big_k * _T)
    q = 2.0 * np.exp(-z) * _inv_gauss_cdf(_T, z)
    prob_right = p / (p + q)

    out = np.empty(z.size)
    todo = np.arange(z.size)
    while todo.size:
        zt, kt = z[todo], big_k[todo]
        right = rng.random(todo.size) < prob_right[todo]
        x = np.empty(todo.size)
        x[right] = _T + rng.standard_exponential(int(right.sum())) / kt[right]
        if (~right).any():
            x[~right] = _truncated_inv_gauss(zt[~right], rng)
        s = _coef(0, x)
        y = rng.random(todo.size) * s
        decided = np.zeros(todo.size, dtype=bool)
        accepted = np.zeros(todo.size, dtype=bool)
        n = 0
        while not decided.all():
            n += 1
            live = ~decided
            a_n = _coef(n, x[live])
            if n % 2:
                s[live] -= a_n
                hit = y[live] <= s[live]
                li = np.flatnonzero(live)
                accepted[li[hit]] = True
                decided[li[hit]] = True
            else:
                s[live] += a_n
                miss = y[live] > s[live]
                li = np.flatnonzero(live)
                decided[li[miss]] = True
        out[todo[accepted]] = 0.25 * x[accepted]
        todo = todo[~accepted]
    out = out.reshape(shape)
    return float(out[0]) if scalar else out
