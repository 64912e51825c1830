"""Command-line entry point: ``lbprocess <subcommand> [options]``.

Exit codes: 0 success, 1 data or runtime error, 2 usage error.
"""

import argparse
import os
import sys

from ..binary_regression import SamplerError
from . import runs
from .config import load_config
from .scenarios import SCENARIOS, DataError, ScenarioSpec, simulate

OUT_ENV = "LBPROCESS_OUT"


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--config", default=None, help="INI file overriding the built-in defaults")
    p.add_argument("--out", default=os.environ.get(OUT_ENV, "out"),
                   help=f"output directory (default ${OUT_ENV} or ./out)")


def build_parser():
    parser = argparse.ArgumentParser(prog="lbprocess", description="Logistic-beta process models and experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario to data.csv and truth.csv")
    _common(p)
    p.add_argument("--scenario", required=True, choices=[s for s in SCENARIOS if s != "csv"])
    p.add_argument("--n", type=int, default=None, help="sample size (training size for spatial_binary)")
    p.add_argument("--rho", type=float, default=0.1, help="Matern range for spatial_binary")
    p.add_argument("--n-test", type=int, default=100, help="held-out points for spatial_binary")
    p.add_argument("--truth", default="lbp", choices=["lbp", "gaussian_copula_ingested"])
    p.add_argument("--truth-csv", default=None, help="x1,x2,p table for an ingested truth")

    p = sub.add_parser("fit-binary", help="fit the latent logistic-beta process model to x[,x2],z data")
    _common(p)
    p.add_argument("--data", required=True)

    p = sub.add_parser("fit-ddp", help="fit the dependent stick-breaking mixture to x,y data")
    _common(p)
    p.add_argument("--data", required=True)

    p = sub.add_parser("predict", help="posterior summaries at new points from a fit directory")
    _common(p)
    p.add_argument("--draws", required=True, help="fit directory")
    p.add_argument("--points", required=True, help="CSV with x or x1[,x2]")

    p = sub.add_parser("prior-analyze", help="tie probability, correlation curves and competitor bounds")
    _common(p)
    p.add_argument("--b", type=float, default=1.0)

    p = sub.add_parser("diagnose", help="ESS, acceptance and accuracy metrics from a fit directory")
    _common(p)
    p.add_argument("--draws", required=True, help="fit directory")
    p.add_argument("--truth", default=None, help="truth.csv from simulate")
    p.add_argument("--scenario", default=None, choices=["scenario_a", "scenario_b"])

    p = sub.add_parser("replicate", help="repeat simulate-fit-diagnose for a named experiment")
    _common(p)
    p.add_argument("--experiment", required=True, choices=sorted(runs.EXPERIMENTS))
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rho", type=float, default=0.1)
    return parser


def _run(args):
    cmd = args.command
    if cmd == "simulate":
        path = args.truth_csv
        spec = ScenarioSpec(args.scenario, n=args.n, rho=args.rho, n_test=args.n_test, truth=args.truth, path=path)
        data, _ = simulate(spec, args.seed, args.out)
        print(f"wrote {len(next(iter(data.values())))} rows to {os.path.join(args.out, 'data.csv')}")
    elif cmd == "fit-binary":
        chain = runs.fit_binary(args.data, load_config(args.config), args.seed, args.out)
        print(f"{chain.draws} draws in {chain.elapsed:.1f}s; lambda acceptance {chain.acceptance_rate():.3f}")
    elif cmd == "fit-ddp":
        chain = runs.fit_ddp(args.data, load_config(args.config), args.seed, args.out)
        print(f"{chain.draws} draws in {chain.elapsed:.1f}s")
    elif cmd == "predict":
        runs.predict(args.draws, args.points, args.seed, args.out)
        print(f"predictions written to {args.out}")
    elif cmd == "prior-analyze":
        if not args.b > 0:
            raise _Usage("--b must be positive")
        rows, _ = runs.prior_analyze(args.b, load_config(args.config), args.seed, args.out)
        for d, t, c in zip(rows["distance"], rows["tie"], rows["corr_rpm"]):
            print(f"distance {d:g}: tie probability {t:.4f}, correlation {c:.4f}")
    elif cmd == "diagnose":
        rep = runs.diagnose(args.draws, args.out, args.truth, args.scenario, args.seed)
        for name, value in rep.rows():
            print(f"{name}: {value:.6g}")
    elif cmd == "replicate":
        if args.replicates < 1 or args.jobs < 1:
            raise _Usage("--replicates and --jobs must be positive")
        cfg = runs.experiment_config(args.experiment, args.config)
        runs.replicate(args.experiment, args.replicates, cfg, args.seed, args.out, args.jobs, args.n, args.rho)
        print(f"replicate table written to {os.path.join(args.out, 'replicates.csv')}")


class _Usage(Exception):
    pass


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.config is not None and not os.path.exists(args.config):
        parser.print_usage(sys.stderr)
        print(f"lbprocess: error: config file not found: {args.config}", file=sys.stderr)
        return 2
    try:
        _run(args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"lbprocess: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, SamplerError, OSError, ValueError) as exc:
        print(f"lbprocess: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
