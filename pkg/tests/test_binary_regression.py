import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from lbprocess.binary_regression import (
    BinaryDataset,
    BinaryRegressionConfig,
    BinarySampler,
    SamplerError,
    adaptive_proposal,
    collapsed_lambda_log_likelihood,
    eta_conditional_moments,
    predict_probabilities,
    run_chain,
    step_ab_pmmh,
    step_eta,
    step_kernel_params,
    step_lambda_mh,
    step_lambda_particle_gibbs,
    step_pg,
)
from lbprocess.harness.diagnostics import ess_univariate
from lbprocess.harness.geweke import geweke_binary
from lbprocess.kernels import CorrelationMatrix, Matern, cholesky_jitter
from lbprocess.logistic_beta import LBParams
from lbprocess.polya import PolyaParams, polya_identity_log_factor, polya_log_density
from lbprocess.special_math import digamma, logistic, trigamma


def rank_q(n, q, seed):
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((n, q))
    phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    return CorrelationMatrix(phi @ phi.T, phi, np.zeros(n))


# ---------------------------------------------------------------- data types


def test_dataset_validation():
    with pytest.raises(ValueError):
        BinaryDataset([0.1, 0.2], [0, 2])
    with pytest.raises(ValueError):
        BinaryDataset([0.1], [0, 1])
    assert BinaryDataset([[0.1, 0.2]], [1]).n == 1


def test_config_validation():
    with pytest.raises(ValueError):
        BinaryRegressionConfig(kernel=Matern(0.1), iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        BinaryRegressionConfig(kernel=Matern(0.1), particles=0)
    with pytest.raises(ValueError):
        BinaryRegressionConfig()


# ---------------------------------------------------------------- omega


def test_pg_mean_at_zero():
    rng = np.random.default_rng(1)
    w = np.concatenate([step_pg(np.zeros(1000), rng) for _ in range(100)])
    assert abs(w.mean() - 0.25) < 4 * w.std() / math.sqrt(w.size)


def test_pg_large_eta():
    w = step_pg(np.full(20_000, 10.0), np.random.default_rng(2))
    assert w.shape == (20_000,)
    assert w.mean() == pytest.approx(math.tanh(5) / 20, rel=0.01)


def test_pg_inactive_are_zero():
    active = np.array([True, False, True])
    w = step_pg(np.zeros(3), np.random.default_rng(3), active)
    assert w[1] == 0 and np.all(w[active] > 0)


# ---------------------------------------------------------------- collapsed likelihood


def test_collapsed_n1_example():
    for lam in (0.1, 1.0, 4.0):
        got = collapsed_lambda_log_likelihood(lam, [1.0], [1], [[1.0]], (1, 1))
        assert got == pytest.approx(stats.norm.logpdf(0.5, 0, math.sqrt(lam + 1)), abs=1e-12)


def test_collapsed_general_dense_oracle():
    rng = np.random.default_rng(4)
    R = Matern(0.3).cross(rng.random((6, 1)), rng.random((6, 1)))
    pts = rng.random((6, 1))
    R = Matern(0.3).cross(pts, pts)
    omega = rng.random(6) + 0.1
    z = rng.integers(0, 2, 6)
    lam = 1.7
    ab = (2.0, 0.5)
    ref = stats.multivariate_normal(np.full(6, 0.5 * lam * 1.5), lam * R + np.diag(1 / omega)).logpdf((z - 0.5) / omega)
    assert collapsed_lambda_log_likelihood(lam, omega, z, R, ab) == pytest.approx(ref, abs=1e-9)


def test_collapsed_low_rank_matches_dense():
    R = rank_q(10, 2, 5)
    rng = np.random.default_rng(5)
    omega = rng.random(10) + 0.05
    z = rng.integers(0, 2, 10)
    for lam in (0.2, 1.0, 9.0):
        lo = collapsed_lambda_log_likelihood(lam, omega, z, R, (1, 3), low_rank=True)
        hi = collapsed_lambda_log_likelihood(lam, omega, z, R, (1, 3), low_rank=False)
        assert lo == pytest.approx(hi, abs=1e-8)


def test_collapsed_ignores_unobserved():
    R = np.array([[1.0, 0.4], [0.4, 1.0]])
    full = collapsed_lambda_log_likelihood(0.8, [0.3, 0.0], [1, 0], R, (1, 2))
    single = collapsed_lambda_log_likelihood(0.8, [0.3], [1], [[1.0]], (1, 2))
    assert full == pytest.approx(single, abs=1e-12)


def test_collapsed_argmax_grid_vs_optimizer():
    f = lambda lam: collapsed_lambda_log_likelihood(lam, [1.0], [1], [[1.0]], (1, 1))
    grid = np.linspace(1e-4, 3, 3001)
    best = grid[np.argmax([f(g) for g in grid])]
    res = optimize.minimize_scalar(lambda l: -f(l), bounds=(1e-6, 3), method="bounded")
    # 0.5^2 - 1 < 0, so the maximum sits at the lower boundary
    assert best == grid[0]
    assert res.x < 1e-3


def test_collapsed_rejects_nonpositive():
    with pytest.raises(ValueError):
        collapsed_lambda_log_likelihood(0.0, [1.0], [1], [[1.0]], (1, 1))


def test_collapsed_consistency_n2():
    rng = np.random.default_rng(6)
    R = np.array([[1.0, 0.6], [0.6, 1.0]])
    omega = np.array([0.4, 1.3])
    z = np.array([1, 0])
    ab = LBParams(1.5, 3.0)
    kappa = z - 0.5
    diffs = []
    for lam in (0.3, 1.0, 2.5):
        ll = collapsed_lambda_log_likelihood(lam, omega, z, R, ab)
        mean, cov = eta_conditional_moments(lam, omega, z, R, ab)
        for _ in range(5):
            eta = rng.normal(size=2)
            left = ll + stats.multivariate_normal(mean, cov).logpdf(eta)
            right = (stats.multivariate_normal(np.full(2, ab.location(lam)), lam * R).logpdf(eta)
                     + kappa @ eta - 0.5 * omega @ eta**2)
            diffs.append(left - right)
    assert np.ptp(diffs) < 1e-6


# ---------------------------------------------------------------- proposals and lambda moves


def h(a, c):
    return 2 * (digamma(a) - digamma(c - a)) / (2 * a - c)


def test_adaptive_proposal_examples():
    p = adaptive_proposal((1, 3), 2 * trigamma(2.0))
    assert (p.a, p.b) == (2.0, 2.0)
    assert adaptive_proposal((1, 1), 2.0).a == 1.0
    p = adaptive_proposal((1, 3), 3.0)
    assert p.a + p.b == pytest.approx(4.0) and p.a <= p.b
    assert h(p.a, 4.0) == pytest.approx(3.0, abs=1e-8)
    with pytest.raises(ValueError):
        adaptive_proposal((1, 1), 0.0)


class FixedRng:
    """Returns a fixed uniform so accept/reject is decided by the caller."""

    def __init__(self, rng, u=0.999):
        self.u = u

    def random(self, *a, **k):
        return self.u


def test_mh_ratio_example(monkeypatch):
    import lbprocess.binary_regression as br

    monkeypatch.setattr(br, "sample_polya", lambda *a, **k: 2.0)
    # log alpha = 0.5 > 0, so the move is taken regardless of the uniform
    lam, acc = step_lambda_mh(1.0, lambda l: 0.0, (1, 3), PolyaParams(2, 2), FixedRng(None, 0.9999))
    assert acc and lam == 2.0
    # reversed move has alpha = e^{-0.5}; accept iff u < 0.6065
    monkeypatch.setattr(br, "sample_polya", lambda *a, **k: 1.0)
    lam, acc = step_lambda_mh(2.0, lambda l: 0.0, (1, 3), PolyaParams(2, 2), FixedRng(None, 0.60))
    assert acc
    lam, acc = step_lambda_mh(2.0, lambda l: 0.0, (1, 3), PolyaParams(2, 2), FixedRng(None, 0.61))
    assert not acc and lam == 2.0


def test_mh_same_proposal_uses_likelihood_only(monkeypatch):
    import lbprocess.binary_regression as br

    monkeypatch.setattr(br, "sample_polya", lambda *a, **k: 3.0)
    ll = lambda l: -l
    # alpha = exp(-3 + 1) = e^{-2}
    assert step_lambda_mh(1.0, ll, (2, 2), PolyaParams(2, 2), FixedRng(None, 0.13))[1]
    assert not step_lambda_mh(1.0, ll, (2, 2), PolyaParams(2, 2), FixedRng(None, 0.14))[1]


def test_particle_gibbs_identical_candidates(monkeypatch):
    import lbprocess.binary_regression as br

    monkeypatch.setattr(br, "sample_polya", lambda *a, size=None, **k: np.full(size, 1.5))
    lam, _ = step_lambda_particle_gibbs(1.5, lambda l: 0.0, (1, 2), PolyaParams(1, 2), 1, np.random.default_rng(0))
    assert lam == 1.5


def test_particle_gibbs_uniform_selection(monkeypatch):
    import lbprocess.binary_regression as br

    n_part = 4
    monkeypatch.setattr(br, "sample_polya", lambda *a, size=None, **k: np.arange(1.0, size + 1))
    rng = np.random.default_rng(0)
    counts = np.zeros(n_part + 1)
    fresh = 0
    for _ in range(10_000):
        lam, acc = step_lambda_particle_gibbs(99.0, lambda l: 0.0, (1, 2), PolyaParams(1, 2), n_part, rng)
        counts[n_part if lam == 99.0 else int(lam) - 1] += 1
        fresh += acc
    assert stats.chisquare(counts).pvalue > 0.01
    assert fresh == counts[:n_part].sum()


# ---------------------------------------------------------------- eta


def test_eta_n1_quadrature():
    lam, omega, z = 1.3, 0.7, 1
    ab = (2.0, 2.0)
    mean, var = eta_conditional_moments(lam, [omega], [z], [[1.0]], ab)
    prec = omega + 1 / lam
    assert mean[0] == pytest.approx((z - 0.5) / prec, abs=1e-12)

    def dens(e):
        return math.exp(-0.5 * e**2 / lam + (z - 0.5) * e - 0.5 * omega * e**2)

    norm = integrate.quad(dens, -30, 30)[0]
    mq = integrate.quad(lambda e: e * dens(e), -30, 30)[0] / norm
    draws = np.array([step_eta(lam, [omega], [z], [[1.0]], ab, np.random.default_rng(i))[0][0] for i in range(4000)])
    assert abs(draws.mean() - mq) < 4 * math.sqrt(1 / prec / 4000)
    assert abs(mean[0] - mq) < 1e-3


def test_eta_low_rank_matches_full_moments():
    R = rank_q(8, 2, 9)
    rng = np.random.default_rng(9)
    omega = rng.random(8) + 0.1
    z = rng.integers(0, 2, 8)
    m_lo, c_lo = eta_conditional_moments(1.4, omega, z, R, (1, 3), path="low")
    m_hi, c_hi = eta_conditional_moments(1.4, omega, z, R, (1, 3), path="full")
    np.testing.assert_allclose(m_lo, m_hi, atol=1e-8)
    np.testing.assert_allclose(c_lo, c_hi, atol=1e-8)


def test_eta_draws_match_moments_both_paths():
    R = rank_q(8, 2, 10)
    rng = np.random.default_rng(10)
    omega = rng.random(8) + 0.1
    z = rng.integers(0, 2, 8)
    mean, cov = eta_conditional_moments(0.9, omega, z, R, (1, 3), path="low")
    sd = np.sqrt(np.diag(cov))
    for path in ("low", "full"):
        draws = np.array([step_eta(0.9, omega, z, R, (1, 3), rng, path=path)[0] for _ in range(4000)])
        assert np.all(np.abs(draws.mean(0) - mean) < 4.5 * sd / math.sqrt(4000))


def test_eta_full_rank_dense_formula():
    pts = np.linspace(0, 1, 5)[:, None]
    R = Matern(0.3).cross(pts, pts)
    rng = np.random.default_rng(11)
    omega = rng.random(5) + 0.2
    z = rng.integers(0, 2, 5)
    lam, (a, b) = 1.1, (2.0, 1.0)
    Rinv = np.linalg.inv(R)
    V = np.linalg.inv(np.diag(omega) + Rinv / lam)
    ref = V @ ((z - 0.5) + 0.5 * (a - b) * Rinv @ np.ones(5))
    mean, cov = eta_conditional_moments(lam, omega, z, R, (a, b))
    np.testing.assert_allclose(mean, ref, atol=1e-9)
    np.testing.assert_allclose(cov, V, atol=1e-9)


def test_eta_all_ones_positive():
    pts = np.linspace(0, 1, 6)[:, None]
    R = Matern(0.2).cross(pts, pts)
    mean, _ = eta_conditional_moments(2.0, np.full(6, 0.3), np.ones(6), R, (1.5, 1.5))
    assert np.all(mean > 0)


# ---------------------------------------------------------------- kernel range


def _chol(rho, pts):
    return cholesky_jitter(Matern(rho).cross(pts, pts))[0]


def test_range_single_grid():
    assert step_kernel_params(np.zeros(3), 1.0, (1, 1), [np.eye(3)], [0.0], np.random.default_rng(0)) == 0


def test_range_identifies_truth():
    rng = np.random.default_rng(12)
    pts = np.linspace(0, 1, 60)[:, None]
    chols = [_chol(0.05, pts), _chol(0.3, pts)]
    eta = 0.5 * 1.0 * (1 - 2) + chols[1] @ rng.standard_normal(60)
    picks = [step_kernel_params(eta, 1.0, (1, 2), chols, np.log([0.5, 0.5]), rng) for _ in range(200)]
    assert np.mean(np.array(picks) == 1) > 0.9


def test_range_identical_matrices_uniform():
    rng = np.random.default_rng(13)
    c = _chol(0.2, np.linspace(0, 1, 4)[:, None])
    picks = [step_kernel_params(rng.normal(size=4), 1.0, (1, 1), [c] * 3, np.log(np.full(3, 1 / 3)), rng)
             for _ in range(3000)]
    assert stats.chisquare(np.bincount(picks, minlength=3)).pvalue > 0.01


# ---------------------------------------------------------------- shapes


def test_pmmh_zero_prior_rejects():
    rng = np.random.default_rng(14)
    parts = np.ones(3)
    ab, p, k, acc = step_ab_pmmh((1, 2), parts, 0, lambda s: (lambda l: 0.0), lambda a, b: -np.inf, 0.2, rng)
    assert not acc and (ab.a, ab.b) == (1, 2) and p is parts


def test_pmmh_identical_proposal_accepts(monkeypatch):
    import lbprocess.binary_regression as br

    parts = np.array([0.5, 1.0, 2.0])
    monkeypatch.setattr(br, "sample_polya", lambda *a, size=None, **k: parts.copy())
    for _ in range(20):
        ab, p, k, acc = step_ab_pmmh((1, 2), parts, 0, lambda s: (lambda l: -l), lambda a, b: 0.0, 0.0,
                                      np.random.default_rng(15))
        assert acc and (ab.a, ab.b) == (1, 2)


@pytest.mark.slow
def test_pmmh_tight_prior_single_observation():
    sd = 0.1
    prior = lambda a, b: -((math.log(a) - math.log(2)) ** 2 + (math.log(b) - math.log(3)) ** 2) / (2 * sd**2)
    cfg = BinaryRegressionConfig(shape=(2, 3), kernel=Matern(0.2), iterations=20_000, burn_in=1000,
                                 ab_log_prior=prior, seed=16)
    out = run_chain(cfg, BinaryDataset([[0.5]], [1]))
    a, b = out.ab.mean(0)
    q = 1.96 * sd
    assert 2 * math.exp(-q) < a < 2 * math.exp(q)
    assert 3 * math.exp(-q) < b < 3 * math.exp(q)


# ---------------------------------------------------------------- chains


def _small_problem(n=30, seed=17):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.random(n))[:, None]
    z = (rng.random(n) < logistic(np.cos(3 * x[:, 0]))).astype(int)
    return BinaryDataset(x, z)


def test_determinism_and_record_count():
    data = _small_problem()
    cfg = BinaryRegressionConfig(shape=(1, 2), kernel=Matern(0.3), iterations=60, burn_in=20, seed=3)
    a, b = run_chain(cfg, data), run_chain(cfg, data)
    assert a.draws == 40
    np.testing.assert_array_equal(a.eta, b.eta)
    np.testing.assert_array_equal(a.lam, b.lam)
    assert a.accepted == b.accepted
    one = run_chain(BinaryRegressionConfig(shape=(1, 2), kernel=Matern(0.3), iterations=5, burn_in=4), data)
    assert one.draws == 1


def test_all_variants_run():
    data = _small_problem()
    for kw in (dict(lambda_sampler="particle_gibbs"), dict(adapted=False), dict(blocked=False),
               dict(range_grid=(0.1, 0.2, 0.3))):
        out = run_chain(BinaryRegressionConfig(shape=(1, 2), kernel=Matern(0.3), iterations=30, burn_in=10, **kw), data)
        assert np.all(np.isfinite(out.eta)) and np.all(out.lam > 0)
        if "range_grid" in kw:
            assert set(np.unique(out.rho)) <= {0.1, 0.2, 0.3}


def test_errors_carry_iteration(monkeypatch):
    import lbprocess.binary_regression as br

    def boom(*a, **k):
        raise np.linalg.LinAlgError("bad")

    monkeypatch.setattr(br, "step_eta", boom)
    cfg = BinaryRegressionConfig(shape=(1, 2), kernel=Matern(0.3), iterations=3, burn_in=0)
    with pytest.raises(SamplerError) as err:
        run_chain(cfg, _small_problem())
    assert err.value.iteration == 0


def test_low_and_full_paths_agree_along_chain():
    from lbprocess.kernels import FeatureMap, SplineBasis

    basis = SplineBasis.from_data(np.linspace(0, 1, 40), 5, (0.0, 1.0))
    data = _small_problem(12, 18)
    cfg = BinaryRegressionConfig(shape=(1, 3), kernel=FeatureMap(basis), rank="low", iterations=100, burn_in=0, seed=4)
    smp = BinarySampler(cfg, data.points[:, 0])
    rng = np.random.default_rng(4)
    state = smp.initial_state(rng)
    for _ in range(100):
        smp.cycle(state, data.z, rng)
        lo = eta_conditional_moments(state.lam, state.omega, data.z, smp.R, state.ab, path="low")
        hi = eta_conditional_moments(state.lam, state.omega, data.z, smp.R, state.ab, path="full")
        np.testing.assert_allclose(lo[0], hi[0], atol=1e-8)
        np.testing.assert_allclose(lo[1], hi[1], atol=1e-8)


def test_identity_ratio_against_series():
    rng = np.random.default_rng(19)
    checked = 0
    for _ in range(40):
        c = rng.uniform(1, 6)
        a, a2 = rng.uniform(0.2, c - 0.2, size=2)
        lam = rng.uniform(0.3, 4)
        s, t = (a, c - a), (a2, c - a2)
        ls, ok1 = polya_log_density(lam, s)
        lt, ok2 = polya_log_density(lam, t)
        if ok1 and ok2:
            assert polya_identity_log_factor(lam, s, t) == pytest.approx(lt - ls, abs=1e-5)
            checked += 1
    assert checked > 20


@pytest.mark.slow
def test_blocked_and_nonblocked_agree():
    rng = np.random.default_rng(20)
    x = np.sort(rng.random(50))[:, None]
    z = (rng.random(50) < logistic(np.sin(6 * x[:, 0]))).astype(int)
    data = BinaryDataset(x, z)
    res = []
    for blocked, seed in ((True, 21), (False, 22)):
        cfg = BinaryRegressionConfig(shape=(1, 2), kernel=Matern(0.2), blocked=blocked,
                                     iterations=52_000, burn_in=2000, seed=seed)
        lam = run_chain(cfg, data).lam
        res.append((lam.mean(), lam.var() / ess_univariate(lam)))
    (m1, v1), (m2, v2) = res
    assert abs(m1 - m2) < 4 * math.sqrt(v1 + v2)


def test_geweke_joint_correctness():
    res = geweke_binary((1.0, 2.0), n=5, sweeps=20_000, thin=10, seed=23)
    for fwd, succ in zip(res["forward"], res["successive"]):
        assert stats.ks_2samp(fwd, succ).pvalue > 0.01


# ---------------------------------------------------------------- prediction


def test_prediction_interpolates_and_reverts():
    data = _small_problem(25, 24)
    cfg = BinaryRegressionConfig(shape=(2, 3), kernel=Matern(0.1), iterations=400, burn_in=100, seed=5)
    chain = run_chain(cfg, data)
    new = np.array([[data.points[3, 0]], [40.0]])
    res = predict_probabilities(chain, cfg, data.points, new)
    at_train = logistic(chain.eta[:, 3])
    assert res["mean"][0] == pytest.approx(at_train.mean(), abs=1e-6)
    assert res["lower"][0] == pytest.approx(np.quantile(at_train, 0.025), abs=1e-6)
    assert abs(res["mean"][1] - 2 / 5) < 0.05
    assert res["upper"][1] - res["lower"][1] >= res["upper"][0] - res["lower"][0]
