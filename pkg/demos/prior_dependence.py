"""Prior dependence of the logistic-beta dependent Dirichlet process.

Prints tie probabilities and random-measure correlations against distance
for a Matern kernel, then the competitor lower-bound table.

    python demos/prior_dependence.py [--b 1.0]
"""

import argparse

import numpy as np

from lbprocess.ddp_mixture import competitor_corr_bounds, corr_rpm, mu_mc, tie_probability
from lbprocess.kernels import Matern


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--b", type=float, default=1.0)
    parser.add_argument("--nsim", type=int, default=200_000)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    kernel = Matern(0.3, 1.5)

    print(f"b = {args.b:g}, Matern range 0.3, smoothness 1.5")
    print(" dist   tie     corr")
    for d in (0.01, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6):
        mu, _ = mu_mc(kernel, [0.0], [d], args.b, args.nsim, rng)
        print(f"{d:5.2f}  {tie_probability(mu, args.b):.4f}  {corr_rpm(mu, args.b):.4f}")

    print("\nlower bounds on the random-measure correlation")
    for b in (0.5, 1.0, 2.0):
        table = competitor_corr_bounds(b, args.nsim, rng)
        print(f"b={b:g}: " + "  ".join(f"{k} {v['rpm_corr']:.4f}" for k, v in table.items()))


if __name__ == "__main__":
    main()
