"""Correlation kernels and correlation-matrix construction.

Four kernel families are provided, all with unit diagonal:

* ``Matern`` - Matern kernel on Euclidean distance.
* ``AR1`` - ``rho ** |t - t'|`` on integer indices.
* ``FeatureMap`` - inner product of a normalized feature map; rank ``q``.
* ``ModifiedPredictiveProcess`` - knot-based low-rank approximation of a
  parent kernel with its diagonal restored to one.

``build_matrix`` returns a :class:`CorrelationMatrix` that carries the
low-rank factor when one exists, so samplers can use Woodbury identities.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special
from scipy.interpolate import BSpline

from .special_math import bessel_k

__all__ = [
    "FactorizationError",
    "cholesky_jitter",
    "matern",
    "ar1",
    "SplineBasis",
    "feature_map_eval",
    "Matern",
    "AR1",
    "FeatureMap",
    "ModifiedPredictiveProcess",
    "CorrelationMatrix",
    "build_matrix",
    "cross_matrix",
    "kernel_from_dict",
    "kernel_to_dict",
]


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a matrix cannot be factorized even after jitter escalation."""


def cholesky_jitter(a, start=1e-10, stop=1e-6):
    """Lower Cholesky factor of ``a``, adding diagonal jitter if needed.

    Jitter starts at ``start`` and grows by factors of ten up to ``stop``.
    Returns ``(L, jitter)``; raises :class:`FactorizationError` beyond ``stop``.
    """
    a = np.asarray(a, dtype=float)
    try:
        return np.linalg.cholesky(a), 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(a.shape[0])
    jitter = start
    while jitter <= stop * (1 + 1e-9):
        try:
            return np.linalg.cholesky(a + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(f"matrix not positive definite with jitter up to {stop:g}")


def _as_points(points):
    x = np.asarray(points, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("empty point list")
    return x


def _distance(x1, x2):
    d2 = np.sum((x1[:, None, :] - x2[None, :, :]) ** 2, axis=-1)
    return np.sqrt(np.maximum(d2, 0.0))


def matern(d, rho, nu, closed_form=True):
    """Matern correlation at distance ``d`` with range ``rho`` and smoothness ``nu``.

    Orders 1/2, 3/2 and 5/2 use their elementary closed forms unless
    ``closed_form`` is False, in which case the Bessel-function expression is
    evaluated directly.
    """
    scalar = np.ndim(d) == 0
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    u = d / rho
    if closed_form and nu == 0.5:
        out = np.exp(-u)
    elif closed_form and nu == 1.5:
        out = (1.0 + u) * np.exp(-u)
    elif closed_form and nu == 2.5:
        out = (1.0 + u + u * u / 3.0) * np.exp(-u)
    else:
        out = np.ones_like(u)
        pos = u > 0
        up = u[pos]
        log_scale = (1.0 - nu) * np.log(2.0) - special.gammaln(nu)
        with np.errstate(over="ignore", invalid="ignore"):
            val = np.exp(log_scale + nu * np.log(up)) * bessel_k(nu, up)
        # K_nu underflows far out; the correlation there is zero
        out[pos] = np.where(np.isfinite(val), np.minimum(val, 1.0), 0.0)
    return float(out) if scalar else out


def ar1(t, t_prime, rho):
    """AR(1) correlation ``rho ** |t - t'|``."""
    lag = np.abs(np.asarray(t) - np.asarray(t_prime))
    out = np.asarray(rho, dtype=float) ** lag
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# natural cubic spline feature map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplineBasis:
    """Natural cubic spline basis on ``[lower, upper]``.

    The unnormalized basis is the cubic B-spline basis on the given knots
    projected onto the natural (zero second derivative at both boundaries)
    subspace; with ``intercept=True`` the constant function lies in its span.
    ``q`` equals ``len(interior_knots) + 1 + intercept``.
    """

    lower: float
    upper: float
    interior_knots: tuple
    intercept: bool = True
    _projection: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("lower must be below upper")
        knots = np.asarray(self.interior_knots, dtype=float)
        if np.any((knots <= self.lower) | (knots >= self.upper)):
            raise ValueError("interior knots must lie strictly inside the domain")
        t = self._augmented_knots()
        nb = len(t) - 4
        const = np.empty((2, nb))
        for j in range(nb):
            coef = np.zeros(nb)
            coef[j] = 1.0
            d2 = BSpline(t, coef, 3, extrapolate=True).derivative(2)
            const[:, j] = d2([self.lower, self.upper])
        if not self.intercept:
            const = const[:, 1:]
        q_full, _ = np.linalg.qr(const.T, mode="complete")
        object.__setattr__(self, "_projection", q_full[:, 2:])

    @classmethod
    def from_data(cls, x, df=6, domain=None, intercept=True):
        """Basis with interior knots at equally spaced quantiles of ``x``.

        ``df`` is the number of basis functions (intercept included when
        ``intercept`` is True), matching the usual ``ns(x, df)`` convention.
        """
        x = np.asarray(x, dtype=float).ravel()
        lower, upper = (x.min(), x.max()) if domain is None else domain
        n_interior = df - 1 - int(intercept)
        if n_interior < 0:
            raise ValueError("df too small")
        probs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
        knots = np.quantile(x, probs) if n_interior else np.array([])
        return cls(float(lower), float(upper), tuple(float(k) for k in knots), intercept)

    @property
    def q(self):
        return self._projection.shape[1]

    def _augmented_knots(self):
        return np.concatenate(
            [np.full(4, self.lower), np.asarray(self.interior_knots, float), np.full(4, self.upper)]
        )

    def raw(self, x):
        """Unnormalized basis values, shape ``(n, q)``."""
        x = np.asarray(x, dtype=float).ravel()
        tol = 1e-9 * (self.upper - self.lower)
        if np.any((x < self.lower - tol) | (x > self.upper + tol)):
            raise ValueError(f"points outside the basis domain [{self.lower}, {self.upper}]")
        x = np.clip(x, self.lower, self.upper)
        t = self._augmented_knots()
        design = BSpline.design_matrix(x, t, 3).toarray()
        if not self.intercept:
            design = design[:, 1:]
        return design @ self._projection


def feature_map_eval(spec, x):
    """Normalized feature map ``phi(x) = raw(x) / ||raw(x)||``, shape ``(n, q)``.

    ``spec`` may be a :class:`SplineBasis` or any callable returning the raw
    ``(n, q)`` feature matrix.
    """
    raw = spec.raw(x) if hasattr(spec, "raw") else np.atleast_2d(spec(x))
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0):
        raise ValueError("feature map has zero norm at some point")
    return raw / norms[:, None]


# ---------------------------------------------------------------------------
# kernel variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Matern:
    range: float
    smoothness: float = 1.5

    def __post_init__(self):
        if not (self.range > 0 and self.smoothness > 0):
            raise ValueError("Matern range and smoothness must be positive")

    def cross(self, x1, x2):
        return matern(_distance(_as_points(x1), _as_points(x2)), self.range, self.smoothness)

    def with_range(self, value):
        return Matern(float(value), self.smoothness)


@dataclass(frozen=True)
class AR1:
    rho: float

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ValueError("AR1 coefficient must lie in (-1, 1)")

    def cross(self, x1, x2):
        t1 = np.asarray(x1).ravel()
        t2 = np.asarray(x2).ravel()
        return ar1(t1[:, None], t2[None, :], self.rho)


@dataclass(frozen=True)
class FeatureMap:
    basis: SplineBasis

    def features(self, x):
        return feature_map_eval(self.basis, np.asarray(x, dtype=float).ravel())

    def cross(self, x1, x2):
        return self.features(x1) @ self.features(x2).T


@dataclass(frozen=True)
class ModifiedPredictiveProcess:
    """Low-rank approximation of ``parent`` through the knot set ``knots``.

    Off-diagonal entries are ``r(x)' R_uu^{-1} r(x')`` and the diagonal is
    restored to one.  Two inputs count as the same location only if their
    coordinates are identical.
    """

    parent: object
    knots: np.ndarray = field(compare=False)

    def _knot_factor(self):
        u = _as_points(self.knots)
        l_uu, jitter = cholesky_jitter(self.parent.cross(u, u))
        return u, l_uu

    def factor(self, x):
        """Return ``(Phi, remainder)`` with ``R = Phi Phi' + diag(remainder)``."""
        u, l_uu = self._knot_factor()
        r = self.parent.cross(_as_points(x), u)
        phi = linalg.solve_triangular(l_uu, r.T, lower=True).T
        remainder = np.clip(1.0 - np.sum(phi * phi, axis=1), 0.0, None)
        return phi, remainder

    def cross(self, x1, x2):
        p1 = _as_points(x1)
        p2 = _as_points(x2)
        f1, r1 = self.factor(p1)
        f2, _ = self.factor(p2)
        out = f1 @ f2.T
        same = np.all(p1[:, None, :] == p2[None, :, :], axis=-1)
        out[same] = 1.0
        return out


@dataclass
class CorrelationMatrix:
    """Correlation matrix with optional low-rank structure.

    When ``factor`` is set, ``dense == factor @ factor.T + diag(remainder)``.
    """

    dense: np.ndarray
    factor: np.ndarray | None = None
    remainder: np.ndarray | None = None

    @property
    def n(self):
        return self.dense.shape[0]

    @property
    def is_low_rank(self):
        return self.factor is not None

    @property
    def is_exact_factor(self):
        """True when the factor alone reproduces the matrix (no diagonal remainder)."""
        return self.factor is not None and (self.remainder is None or not np.any(self.remainder > 0))

    def subset(self, idx):
        idx = np.asarray(idx)
        return CorrelationMatrix(
            self.dense[np.ix_(idx, idx)],
            None if self.factor is None else self.factor[idx],
            None if self.remainder is None else self.remainder[idx],
        )


def build_matrix(kernel, points):
    """Correlation matrix of ``kernel`` over ``points``."""
    x = _as_points(points)
    if isinstance(kernel, FeatureMap):
        phi = kernel.features(x[:, 0])
        dense = phi @ phi.T
        np.fill_diagonal(dense, 1.0)
        return CorrelationMatrix(dense, phi, np.zeros(len(x)))
    if isinstance(kernel, ModifiedPredictiveProcess):
        phi, rem = kernel.factor(x)
        dense = phi @ phi.T + np.diag(rem)
        np.fill_diagonal(dense, 1.0)
        return CorrelationMatrix(dense, phi, rem)
    dense = kernel.cross(x, x)
    dense = 0.5 * (dense + dense.T)
    np.fill_diagonal(dense, 1.0)
    return CorrelationMatrix(dense)


def cross_matrix(kernel, points1, points2):
    """Cross-correlation ``R(points1, points2)``."""
    return kernel.cross(_as_points(points1), _as_points(points2))


def kernel_to_dict(kernel):
    """Tagged plain-data description of a kernel (used in config files)."""
    if isinstance(kernel, Matern):
        return {"type": "matern", "range": kernel.range, "smoothness": kernel.smoothness}
    if isinstance(kernel, AR1):
        return {"type": "ar1", "rho": kernel.rho}
    if isinstance(kernel, FeatureMap):
        b = kernel.basis
        return {
            "type": "spline",
            "lower": b.lower,
            "upper": b.upper,
            "interior_knots": list(b.interior_knots),
            "intercept": b.intercept,
        }
    if isinstance(kernel, ModifiedPredictiveProcess):
        return {
            "type": "mpp",
            "parent": kernel_to_dict(kernel.parent),
            "knots": np.asarray(kernel.knots).tolist(),
        }
    raise TypeError(f"unknown kernel {kernel!r}")


def kernel_from_dict(spec, data_x=None):
    """Inverse of :func:`kernel_to_dict`.

    A ``spline`` entry may give ``df`` instead of explicit knots, in which
    case knots are placed at quantiles of ``data_x``.
    """
    kind = spec["type"].lower()
    if kind == "matern":
        return Matern(float(spec["range"]), float(spec.get("smoothness", 1.5)))
    if kind == "ar1":
        return AR1(float(spec["rho"]))
    if kind == "spline":
        if "interior_knots" in spec:
            return FeatureMap(
                SplineBasis(
                    float(spec["lower"]),
                    float(spec["upper"]),
                    tuple(float(k) for k in spec["interior_knots"]),
                    bool(spec.get("intercept", True)),
                )
            )
        if data_x is None:
            raise ValueError("spline kernel with df needs data to place knots")
        domain = (float(spec["lower"]), float(spec["upper"])) if "lower" in spec else None
        return FeatureMap(SplineBasis.from_data(data_x, int(spec.get("df", 6)), domain))
    if kind == "mpp":
        return ModifiedPredictiveProcess(kernel_from_dict(spec["parent"]), np.asarray(spec["knots"], float))
    raise ValueError(f"unknown kernel type {spec['type']!r}")
