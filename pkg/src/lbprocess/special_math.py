"""Special functions and numerically stable primitives.

Polygamma functions use upward recurrence to move the argument above a
threshold followed by the standard asymptotic expansion.  Everything accepts
scalars or numpy arrays and returns the same shape.
"""

import math

import numpy as np
from scipy import special

__all__ = [
    "digamma",
    "trigamma",
    "polygamma3",
    "log_beta",
    "bessel_k",
    "logistic",
    "log_logistic",
    "log_sum_exp",
]

_SHIFT = 10.0
_SHIFT_P3 = 15.0


def _check_positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError(f"{name} must be strictly positive, got {x[~(x > 0)].ravel()[:3]}")
    return x


def _ret(out, scalar):
    return float(out) if scalar else out


def _digamma_scalar(x):
    # pure-python path: samplers call this inside tight loops
    if not x > 0:
        raise ValueError(f"x must be strictly positive, got [{x}]")
    acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = inv2 * (
        -1.0 / 12
        + inv2 * (1.0 / 120 + inv2 * (-1.0 / 252 + inv2 * (1.0 / 240 + inv2 * (-1.0 / 132 + inv2 * (691.0 / 32760 - inv2 / 12)))))
    )
    return acc + math.log(x) - 0.5 / x + series


def digamma(x):
    """Digamma function psi(x) for x > 0."""
    scalar = np.ndim(x) == 0
    if scalar and isinstance(x, (float, int)):
        return _digamma_scalar(float(x))
    x = _check_positive(x).copy()
    acc = np.zeros_like(x)
    while True:
        small = x < _SHIFT
        if not small.any():
            break
        acc[small] -= 1.0 / x[small]
        x[small] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (
        -1.0 / 12
        + inv2 * (1.0 / 120 + inv2 * (-1.0 / 252 + inv2 * (1.0 / 240 + inv2 * (-1.0 / 132 + inv2 * (691.0 / 32760 - inv2 / 12)))))
    )
    out = acc + np.log(x) - 0.5 * inv + series
    return _ret(out, scalar)


def trigamma(x):
    """Trigamma function psi'(x) for x > 0."""
    scalar = np.ndim(x) == 0
    x = _check_positive(x).copy()
    acc = np.zeros_like(x)
    while True:
        small = x < _SHIFT
        if not small.any():
            break
        acc[small] += 1.0 / (x[small] * x[small])
        x[small] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv * (
        1.0
        + 0.5 * inv
        + inv2 * (1.0 / 6 + inv2 * (-1.0 / 30 + inv2 * (1.0 / 42 + inv2 * (-1.0 / 30 + inv2 * (5.0 / 66 + inv2 * (-691.0 / 2730 + inv2 * 7.0 / 6))))))
    )
    return _ret(acc + series, scalar)


def polygamma3(x):
    """Third polygamma function psi'''(x) = 6 sum_k (x + k)^-4."""
    scalar = np.ndim(x) == 0
    x = _check_positive(x).copy()
    acc = np.zeros_like(x)
    while True:
        small = x < _SHIFT_P3
        if not small.any():
            break
        acc[small] += 6.0 / x[small] ** 4
        x[small] += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * inv * (
        2.0
        + 3.0 * inv
        + inv2 * (2.0 + inv2 * (-1.0 + inv2 * (4.0 / 3 + inv2 * (-3.0 + inv2 * (10.0 - inv2 * 691.0 * 182.0 / 2730)))))
    )
    return _ret(acc + series, scalar)


def log_beta(a, b):
    """Log of the beta function B(a, b)."""
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    a = _check_positive(a, "a")
    b = _check_positive(b, "b")
    return _ret(special.betaln(a, b), scalar)


def _bessel_k_half_integer(n, x):
    # K_{n+1/2}(x) = sqrt(pi / 2x) e^{-x} sum_k (n+k)! / (k! (n-k)!) (2x)^-k
    total = np.zeros_like(x)
    for k in range(n + 1):
        coef = math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k))
        total = total + coef * (2.0 * x) ** (-k)
    return np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) * total


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x), for x > 0.

    Half-integer orders use the exact finite closed form.  Other orders go
    through ``scipy.special.kv``.  As x -> 0 the result grows without bound;
    values that exceed the float range are returned as ``inf`` rather than
    raising.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    scalar = np.ndim(x) == 0
    x = _check_positive(x)
    n = nu - 0.5
    with np.errstate(over="ignore"):
        if abs(n - round(n)) < 1e-14 and round(n) <= 20:
            out = _bessel_k_half_integer(int(round(n)), x)
        else:
            out = special.kv(nu, x)
    return _ret(out, scalar)


def logistic(x):
    """Logistic sigmoid 1 / (1 + exp(-x)), stable for any finite x.

    For -30 <= x < 0 the value is formed as ``1 - logistic(-x)`` so that
    ``logistic(x) + logistic(-x) == 1`` holds exactly there; further out the
    ratio form keeps full relative accuracy in the lower tail.
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    upper = 1.0 / (1.0 + e)
    out = np.where(x >= 0, upper, np.where(x >= -30.0, 1.0 - upper, e / (1.0 + e)))
    return _ret(out, scalar)


def log_logistic(x):
    """log sigma(x) = -log(1 + exp(-x)) without overflow."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    out = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    return _ret(out, scalar)


def log_sum_exp(values, axis=None):
    """log(sum(exp(values))) with the max shifted out; ``-inf`` entries are ignored."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty array")
    m = np.max(v, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - m_safe), axis=axis, keepdims=True)) + m_safe
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
