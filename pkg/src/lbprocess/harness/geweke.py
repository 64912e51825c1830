"""Joint-distribution checks for the samplers (Geweke's successive-conditional test).

Each function returns matching samples of a few scalar summaries drawn two
ways: independently from the prior-and-likelihood ("forward"), and from a
chain that alternates a fresh data draw with one sampler cycle
("successive").  If the sampler leaves the posterior invariant the two sets
share a distribution.
"""

import numpy as np

from ..binary_regression import BinaryRegressionConfig, BinarySampler, BinaryRegressionState
from ..ddp_mixture import AtomPrior, MixtureSampler, MixtureState, RegressionDataset, StickBreakingSpec, stick_weights
from ..kernels import Matern
from ..logistic_beta import sample_lbp
from ..polya import polya_mean
from ..special_math import logistic

__all__ = ["geweke_binary", "geweke_mixture"]


def geweke_binary(shape=(1.0, 2.0), n=5, sweeps=20_000, thin=10, seed=0, kernel=None, **config):
    """Forward and successive draws of ``(lam, mean(eta))`` for the binary model.

    Returns ``{"forward": (lam, eta_mean), "successive": (lam, eta_mean)}``,
    each array of length ``sweeps // thin``.
    """
    rng = np.random.default_rng(seed)
    kernel = Matern(0.4) if kernel is None else kernel
    pts = np.linspace(0.0, 1.0, n)
    keep = sweeps // thin
    fwd = sample_lbp(shape, kernel, pts, rng, size=keep)
    lam_f = np.array([r.lam for r in fwd])
    eta_f = np.array([r.eta.mean() for r in fwd])

    cfg = BinaryRegressionConfig(shape=shape, kernel=kernel, iterations=2, burn_in=0, **config)
    smp = BinarySampler(cfg, pts)
    state = smp.initial_state(rng)
    state.lam, state.eta = fwd[0].lam, fwd[0].eta.copy()
    lam_s, eta_s = np.empty(keep), np.empty(keep)
    for it in range(keep * thin):
        z = (rng.random(n) < logistic(state.eta)).astype(float)
        smp.cycle(state, z, rng)
        if it % thin == thin - 1:
            j = it // thin
            lam_s[j], eta_s[j] = state.lam, state.eta.mean()
    return {"forward": (lam_f, eta_f), "successive": (lam_s, eta_s)}


def _draw_data(x, s, atoms, rng):
    mean = atoms.beta[s, 0] + atoms.beta[s, 1] * x
    return mean + rng.standard_normal(len(x)) / np.sqrt(atoms.tau[s])


def _draw_allocations(weights, rng):
    # weights has shape (H, n)
    cdf = np.cumsum(weights, axis=0)
    u = rng.random(weights.shape[1]) * cdf[-1]
    return np.minimum((cdf < u[None, :]).sum(axis=0), weights.shape[0] - 1)


def geweke_mixture(n=6, H=3, b=1.0, sweeps=20_000, thin=10, seed=0, kernel=None, atom_prior=None):
    """Forward and successive draws of ``(lam_1, tau_1)`` for the mixture model.

    ``lam_1`` is the Polya variable of the first stick level and ``tau_1``
    the precision of the first component.
    """
    rng = np.random.default_rng(seed)
    kernel = Matern(0.4) if kernel is None else kernel
    atom_prior = AtomPrior() if atom_prior is None else atom_prior
    spec = StickBreakingSpec(kernel, H=H, b=b)
    x = np.linspace(0.0, 1.0, n)
    keep = sweeps // thin
    lam_f = np.empty(keep)
    tau_f = np.empty(keep)
    for j in range(keep):
        lam_f[j] = sample_lbp(spec.shapes()[0], kernel, x, rng).lam
        tau_f[j] = atom_prior.sample(H, rng).tau[0]

    # start the successive chain at an exact prior draw
    levels = []
    for shape in spec.shapes():
        real = sample_lbp(shape, kernel, x, rng)
        lam = real.lam
        levels.append(BinaryRegressionState(eta=real.eta.copy(), lam=lam, omega=np.zeros(n), ab=shape,
                                            lam_bar=polya_mean(shape.polya), m=1))
    atoms = atom_prior.sample(H, rng)
    s = _draw_allocations(stick_weights(np.vstack([lv.eta for lv in levels])), rng)
    data = RegressionDataset(x, _draw_data(x, s, atoms, rng))
    sampler = MixtureSampler(spec, atom_prior, data, rank="full")
    state = MixtureState(s=s, levels=levels, atoms=atoms)

    lam_s = np.empty(keep)
    tau_s = np.empty(keep)
    for it in range(keep * thin):
        data.y = _draw_data(x, state.s, state.atoms, rng)
        sampler.cycle(state, rng)
        if it % thin == thin - 1:
            j = it // thin
            lam_s[j], tau_s[j] = state.levels[0].lam, state.atoms.tau[0]
    return {"forward": (lam_f, tau_f), "successive": (lam_s, tau_s)}
