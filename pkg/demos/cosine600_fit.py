"""Fit the latent logistic-beta process model to a simulated Cosine600 dataset.

Prints RMSE against the true success probability and interval coverage,
then a coarse text plot of the posterior mean.  Takes a couple of minutes.

    python demos/cosine600_fit.py [--iterations 2000] [--seed 1]
"""

import argparse

import numpy as np

from lbprocess.binary_regression import BinaryDataset, BinaryRegressionConfig, predict_probabilities, run_chain
from lbprocess.harness.scenarios import COSINE_DOMAIN, ScenarioSpec, cosine_truth, simulate
from lbprocess.kernels import Matern


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    data, _ = simulate(ScenarioSpec("cosine600"), seed=args.seed)
    cfg = BinaryRegressionConfig(shape=(2, 4), kernel=Matern(0.3, 1.5), iterations=args.iterations,
                                 burn_in=args.iterations // 2, seed=args.seed)
    chain = run_chain(cfg, BinaryDataset(data["x"], data["z"]))
    grid = np.linspace(*COSINE_DOMAIN, 61)
    pred = predict_probabilities(chain, cfg, data["x"], grid)
    truth = cosine_truth(grid)
    rmse = np.sqrt(np.mean((pred["mean"] - truth) ** 2))
    cover = np.mean((pred["lower"] <= truth) & (truth <= pred["upper"]))
    print(f"{chain.draws} draws in {chain.elapsed:.1f}s, lambda acceptance {chain.acceptance_rate():.2f}")
    print(f"RMSE {rmse:.3f}, 95% interval coverage {cover:.2f}")
    print("  x     truth  mean   band")
    for x, t, m, lo, hi in list(zip(grid, truth, pred["mean"], pred["lower"], pred["upper"]))[::6]:
        print(f"{x:5.2f}  {t:5.2f}  {m:5.2f}  [{lo:4.2f}, {hi:4.2f}]  " + "#" * int(round(40 * m)))


if __name__ == "__main__":
    main()
