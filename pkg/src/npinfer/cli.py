"""Command-line entry point.

Single-threaded linear algebra is pinned before any numerical import; the
replication grid, not the BLAS, is the parallelism axis, and thread-count
variation would break the byte-identical-output guarantee.
"""
import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "VECLIB_MAXIMUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import logging
import sys
from dataclasses import replace

from .errors import ConfigError, DataError, DegenerateInputError, NPInferError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npinfer",
        description="Finite-population inference combining a non-probability "
                    "sample with a reference survey.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo study from a config file")
    p_sim.add_argument("--config", required=True, help="key=value config file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--workers", type=int, default=None,
                       help="parallel worker processes (default: config, then "
                            "NPINFER_WORKERS, then CPU count)")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the config root seed")

    p_est = sub.add_parser("estimate", help="estimate a population mean from data files")
    p_est.add_argument("--reference", required=True,
                       help="reference survey CSV (stratum,psu,weight + covariates)")
    p_est.add_argument("--sample", required=True,
                       help="non-probability sample CSV (covariates + y)")
    p_est.add_argument("--config", required=True, help="key=value config file (B, L, seed)")
    p_est.add_argument("--out", required=True, help="output directory")

    p_syn = sub.add_parser("synthesize",
                           help="export synthetic populations built from a reference file")
    p_syn.add_argument("--reference", required=True,
                       help="reference survey CSV (stratum,psu,weight + covariates)")
    p_syn.add_argument("--n", required=True, type=int, help="population size to complete to")
    p_syn.add_argument("--reps", required=True, type=int, nargs=2, metavar=("B", "L"),
                       help="bootstrap replicates and syntheses per replicate")
    p_syn.add_argument("--out", required=True, help="output directory")
    p_syn.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            from .config import load_sim_config
            from .harness import run_simulation

            cfg = load_sim_config(args.config)
            if args.seed is not None:
                if args.seed < 0:
                    raise ConfigError("seed must be non-negative")
                cfg = replace(cfg, seed=args.seed)
            manifest = run_simulation(cfg, args.out, workers=args.workers)
            print(f"wrote {manifest['outputs']['estimates']} and "
                  f"{manifest['outputs']['summary']} in {args.out}")
        elif args.command == "estimate":
            from .config import load_estimate_config
            from .harness import run_estimate

            values = load_estimate_config(args.config)
            results = run_estimate(args.reference, args.sample, values, args.out)
            for r in results:
                print(f"{r.method:6s} point={r.point:.6g} "
                      f"ci=[{r.ci_low:.6g}, {r.ci_high:.6g}] se={r.variance ** 0.5:.6g}")
            print(f"wrote estimates.csv in {args.out}")
        else:
            from .harness import run_synthesize

            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            written = run_synthesize(args.reference, args.n, args.reps[0],
                                     args.reps[1], args.out, seed=args.seed)
            print(f"wrote {len(written)} synthetic population files in {args.out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, DegenerateInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NPInferError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
