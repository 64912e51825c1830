import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbprocess.kernels import (
    AR1,
    CorrelationMatrix,
    FactorizationError,
    FeatureMap,
    Matern,
    ModifiedPredictiveProcess,
    SplineBasis,
    ar1,
    build_matrix,
    cholesky_jitter,
    feature_map_eval,
    kernel_from_dict,
    kernel_to_dict,
    matern,
)


def spline6():
    return SplineBasis.from_data(np.linspace(0, 1, 101), df=6, domain=(0.0, 1.0))


def test_matern_examples():
    assert matern(0.0, 0.3, 1.5) == 1.0
    assert matern(0.3, 0.3, 0.5) == pytest.approx(math.exp(-1), abs=1e-12)
    assert matern(0.3, 0.3, 1.5) == pytest.approx(2 * math.exp(-1), abs=1e-12)
    d = np.linspace(0, 3, 301)
    for nu in (0.5, 1.2, 1.5, 3.0):
        v = matern(d, 0.4, nu)
        assert np.all(np.diff(v) < 0)
    with pytest.raises(ValueError):
        matern(-0.1, 1.0, 1.5)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_matern_closed_form_equivalence(nu):
    d = np.linspace(1e-4, 5, 500)
    exact = matern(d, 0.7, nu, closed_form=True)
    bessel = matern(d, 0.7, nu, closed_form=False)
    assert np.max(np.abs(bessel / exact - 1)) < 1e-9


def test_ar1_examples():
    assert ar1(3, 3, 0.7) == 1.0
    assert ar1(0, 2, 0.5) == 0.25
    assert ar1(0, 1, -0.8) == pytest.approx(-0.8)
    with pytest.raises(ValueError):
        AR1(1.0)


def test_feature_map_examples():
    const = FeatureMap(lambda x: np.full((len(x), 1), 2.5))
    np.testing.assert_allclose(const.features(np.linspace(0, 1, 5)), 1.0)
    np.testing.assert_allclose(build_matrix(const, np.linspace(0, 1, 5)).dense, 1.0)
    basis = spline6()
    phi = feature_map_eval(basis, np.linspace(0, 1, 57))
    np.testing.assert_allclose(np.linalg.norm(phi, axis=1), 1.0, atol=1e-12)
    pair = feature_map_eval(basis, [0.3, 0.31])
    assert pair[0] @ pair[1] > 0.99
    with pytest.raises(ValueError):
        feature_map_eval(lambda x: np.zeros((len(x), 2)), [0.1])


def test_spline_basis_shape_and_domain():
    basis = spline6()
    assert basis.q == 6
    raw = basis.raw(np.linspace(0, 1, 20))
    # natural boundary: the basis reproduces constants and linear functions
    coef, *_ = np.linalg.lstsq(raw, np.linspace(0, 1, 20), rcond=None)
    np.testing.assert_allclose(raw @ coef, np.linspace(0, 1, 20), atol=1e-10)
    with pytest.raises(ValueError):
        basis.raw([1.5])


def kernels_for_tests():
    knots = np.linspace(0, 1, 6)[:, None]
    return [
        Matern(0.3, 1.5),
        Matern(0.2, 0.8),
        AR1(0.6),
        FeatureMap(spline6()),
        ModifiedPredictiveProcess(Matern(0.3, 1.5), knots),
    ]


@pytest.mark.parametrize("kernel", kernels_for_tests(), ids=lambda k: type(k).__name__)
def test_build_matrix_invariants(kernel):
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 51))
        pts = rng.integers(0, 30, n).astype(float) if isinstance(kernel, AR1) else rng.random(n)
        R = build_matrix(kernel, pts)
        np.testing.assert_array_equal(np.diag(R.dense), 1.0)
        np.testing.assert_allclose(R.dense, R.dense.T, atol=1e-14)
        assert np.linalg.eigvalsh(R.dense).min() >= -1e-8


def test_single_point_matrix():
    for kernel in kernels_for_tests():
        R = build_matrix(kernel, [0.4])
        assert R.dense.shape == (1, 1) and R.dense[0, 0] == 1.0


def test_matern_matrix_example():
    R = build_matrix(Matern(0.3, 1.5), [0.0, 0.3])
    assert R.dense[0, 1] == pytest.approx(2 * math.exp(-1), abs=1e-12)


def test_feature_map_factor():
    R = build_matrix(FeatureMap(spline6()), np.random.default_rng(1).random(40))
    assert R.is_low_rank and R.is_exact_factor
    assert np.max(np.abs(R.dense - R.factor @ R.factor.T)) < 1e-12


def test_mpp_properties():
    knots = np.linspace(0, 1, 7)[:, None]
    parent = Matern(0.25, 1.5)
    mpp = ModifiedPredictiveProcess(parent, knots)
    R = build_matrix(mpp, knots)
    np.testing.assert_allclose(R.dense, parent.cross(knots, knots), atol=1e-10)
    pts = np.random.default_rng(2).random(30)
    R = build_matrix(mpp, pts)
    np.testing.assert_array_equal(np.diag(R.dense), 1.0)
    assert R.is_low_rank and not R.is_exact_factor
    np.testing.assert_allclose(R.dense, R.factor @ R.factor.T + np.diag(R.remainder), atol=1e-12)
    assert mpp.cross(knots[2:3], knots[2:3])[0, 0] == 1.0


def test_two_dimensional_points():
    pts = np.random.default_rng(3).random((15, 2))
    R = build_matrix(Matern(0.2), pts)
    d = np.linalg.norm(pts[0] - pts[1])
    assert R.dense[0, 1] == pytest.approx((1 + d / 0.2) * math.exp(-d / 0.2))


def test_cholesky_jitter():
    a = np.ones((3, 3))
    L, jitter = cholesky_jitter(a)
    assert 0 < jitter <= 1e-6
    np.testing.assert_allclose(L @ L.T, a + jitter * np.eye(3), atol=1e-12)
    L, jitter = cholesky_jitter(np.eye(2))
    assert jitter == 0.0
    with pytest.raises(FactorizationError):
        cholesky_jitter(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_subset():
    R = build_matrix(FeatureMap(spline6()), np.linspace(0, 1, 10))
    sub = R.subset([1, 4, 7])
    np.testing.assert_allclose(sub.dense, R.dense[np.ix_([1, 4, 7], [1, 4, 7])])
    assert isinstance(sub, CorrelationMatrix) and sub.factor.shape == (3, 6)


@pytest.mark.parametrize("kernel", kernels_for_tests(), ids=lambda k: type(k).__name__)
def test_dict_roundtrip(kernel):
    back = kernel_from_dict(kernel_to_dict(kernel))
    pts = np.linspace(0.05, 0.95, 7)
    np.testing.assert_allclose(build_matrix(back, pts).dense, build_matrix(kernel, pts).dense, atol=1e-12)


def test_dict_spline_from_df():
    x = np.random.default_rng(0).random(200)
    k = kernel_from_dict({"type": "spline", "df": 6, "lower": 0, "upper": 1}, x)
    assert k.basis.q == 6
    with pytest.raises(ValueError):
        kernel_from_dict({"type": "spline", "df": 6})
    with pytest.raises(ValueError):
        kernel_from_dict({"type": "rbf"})


@given(st.floats(0.01, 5), st.floats(0.3, 4), st.floats(0, 10))
@settings(max_examples=60, deadline=None)
def test_matern_range(rho, nu, d):
    v = matern(d, rho, nu)
    assert 0.0 <= v <= 1.0
