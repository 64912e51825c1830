"""MCMC and predictive diagnostics computed from stored draws."""

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from statsmodels.tsa.stattools import acovf, levinson_durbin

__all__ = [
    "DegenerateTraceWarning",
    "DiagnosticsReport",
    "ess_univariate",
    "ess_multivariate",
    "crps_empirical",
    "density_and_regression_errors",
    "binary_metrics",
]


class DegenerateTraceWarning(UserWarning):
    """The trace is constant; ESS is reported as the trace length."""


def ess_univariate(trace):
    """Effective sample size from an autoregressive fit of the trace.

    The AR order is chosen by AIC among ``0..min(n-1, 10 log10 n)`` using
    Yule-Walker estimates, and the spectral density at frequency zero is
    ``sigma^2 / (1 - sum(phi))^2``.  ``ESS = n var(trace) / S(0)``.
    """
    x = np.asarray(trace, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise ValueError("trace must have at least 100 draws")
    if np.ptp(x) == 0.0:
        warnings.warn("constant trace; ESS set to its length", DegenerateTraceWarning, stacklevel=2)
        return float(n)
    max_order = int(min(n - 1, math.floor(10.0 * math.log10(n))))
    acov = acovf(x, demean=True, fft=True, nlag=max_order)
    _, _, _, sigma, phi = levinson_durbin(acov, nlags=max_order, isacov=True)
    sigma = np.asarray(sigma, float).copy()
    sigma[0] = acov[0]
    aic = n * np.log(sigma) + 2.0 * np.arange(max_order + 1)
    k = int(np.argmin(aic))
    coef = phi[1 : k + 1, k] if k > 0 else np.zeros(0)
    var_pred = sigma[k] * n / (n - (k + 1))
    spec0 = var_pred / (1.0 - coef.sum()) ** 2
    return float(n * x.var(ddof=1) / spec0)


def _dependent_columns(a):
    """Indices of columns that are (numerically) linear combinations of others."""
    p = a.shape[1]
    bad = []
    for j in range(p):
        others = np.delete(a, j, axis=1)
        if others.shape[1] == 0:
            if np.ptp(a[:, j]) == 0:
                bad.append(j)
            continue
        coef, *_ = np.linalg.lstsq(np.column_stack([np.ones(len(a)), others]), a[:, j], rcond=None)
        resid = a[:, j] - np.column_stack([np.ones(len(a)), others]) @ coef
        if resid.var() <= 1e-10 * max(a[:, j].var(), 1e-300):
            bad.append(j)
    return bad


def ess_multivariate(traces):
    """Multivariate ESS ``n (|Lambda| / |Sigma_bm|)^(1/p)`` with batch size ``floor(sqrt(n))``."""
    x = np.asarray(traces, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    if n < 100:
        raise ValueError("traces must have at least 100 draws")
    size = int(math.floor(math.sqrt(n)))
    n_batches = n // size
    lam = np.atleast_2d(np.cov(x, rowvar=False))
    sign_l, logdet_l = np.linalg.slogdet(lam)
    cond = np.linalg.cond(lam) if p > 1 else 1.0
    if sign_l <= 0 or not np.isfinite(logdet_l) or cond > 1e12:
        bad = _dependent_columns(x)
        raise np.linalg.LinAlgError(f"singular sample covariance; offending coordinates: {bad}")
    used = x[: n_batches * size]
    means = used.reshape(n_batches, size, p).mean(axis=1)
    centered = means - x.mean(axis=0)
    sigma = size * centered.T @ centered / (n_batches - 1)
    sign_s, logdet_s = np.linalg.slogdet(sigma)
    if sign_s <= 0:
        raise np.linalg.LinAlgError("singular batch-means covariance; too few batches for p")
    return float(n * math.exp((logdet_l - logdet_s) / p))


def crps_empirical(samples, truth):
    """CRPS of the empirical distribution of ``samples`` at ``truth``.

    ``mean|s_i - truth| - 0.5 mean_{i,j}|s_i - s_j|``, with the pair term
    evaluated from the sorted sample in ``O(m log m)``.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    m = s.size
    if m == 0:
        raise ValueError("samples must be nonempty")
    first = np.abs(s - truth).mean()
    ranks = 2.0 * np.arange(1, m + 1) - m - 1.0
    pair = 2.0 * (ranks @ s) / (m * m)
    return float(max(first - 0.5 * pair, 0.0))


def density_and_regression_errors(density_est, density_true, mean_est, mean_true, y_grid):
    """Density error ``mean_x sum_g |p_hat - p| dy`` and regression RMSE.

    Density arrays have shape ``(n_x, len(y_grid))``; mean arrays ``(n_x,)``.
    """
    d_est = np.asarray(density_est, float)
    d_true = np.asarray(density_true, float)
    m_est = np.asarray(mean_est, float)
    m_true = np.asarray(mean_true, float)
    y = np.asarray(y_grid, float)
    if d_est.shape != d_true.shape or d_est.ndim != 2 or d_est.shape[1] != y.size:
        raise ValueError(f"density grids mismatch: {d_est.shape} vs {d_true.shape} with {y.size} y values")
    if m_est.shape != m_true.shape or m_est.shape[0] != d_est.shape[0]:
        raise ValueError(f"mean grids mismatch: {m_est.shape} vs {m_true.shape}")
    dy = (y[-1] - y[0]) / (y.size - 1)
    dens = float(np.mean(np.abs(d_est - d_true).sum(axis=1) * dy))
    reg = float(np.sqrt(np.mean((m_est - m_true) ** 2)))
    return dens, reg


def binary_metrics(prob_draws, truth):
    """RMSE and MAE of the posterior mean and the mean CRPS, against true probabilities."""
    draws = np.asarray(prob_draws, float)
    truth = np.asarray(truth, float)
    est = draws.mean(axis=0)
    return {
        "rmse": float(np.sqrt(np.mean((est - truth) ** 2))),
        "mae": float(np.mean(np.abs(est - truth))),
        "crps": float(np.mean([crps_empirical(draws[:, i], truth[i]) for i in range(truth.size)])),
    }


@dataclass
class DiagnosticsReport:
    ess: dict
    mess: float | None
    acceptance: dict
    seconds: float | None
    rmse: float | None = None
    mae: float | None = None
    crps: float | None = None
    density_error: float | None = None
    regression_error: float | None = None

    def __post_init__(self):
        for key, value in self.ess.items():
            if not value > 0:
                raise ValueError(f"ESS for {key} must be positive")

    def as_dict(self):
        return asdict(self)

    def rows(self):
        """Flat ``(metric, value)`` rows, timing excluded (it is not reproducible)."""
        out = [(f"ess_{k}", v) for k, v in sorted(self.ess.items())]
        if self.mess is not None:
            out.append(("mess", self.mess))
        out += [(f"acceptance_{k}", v) for k, v in sorted(self.acceptance.items())]
        for name in ("rmse", "mae", "crps", "density_error", "regression_error"):
            value = getattr(self, name)
            if value is not None:
                out.append((name, value))
        return out
