"""Command-line entry point: ``ewdpmm {simulate,fit,partition,diagnose,pp-check}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import io as fio
from . import pipeline
from .dpmm import ChainError
from .ew import DomainError


def _config(args) -> dict:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        overrides["pp.reps"] = args.reps
    if getattr(args, "iterations", None) is not None:
        overrides["mcmc.iterations"] = args.iterations
    return fio.load_config(args.config, overrides, preset=getattr(args, "preset", None))


def _common(p, config=True):
    p.add_argument("--seed", type=int, help="master seed (overrides the config's seed)")
    if config:
        p.add_argument("--config", help="JSON config with flat dotted keys")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ewdpmm", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic study dataset")
    p.add_argument("study", choices=["study1", "study2", "custom"])
    p.add_argument("--atoms", help="JSON with kernel, atoms and weights (custom study)")
    p.add_argument("-N", type=int, default=500, help="number of observations")
    p.add_argument("-n", type=int, default=20, help="sequence dimension")
    _common(p, config=False)

    p = sub.add_parser("fit", help="run the sampler and write trace, partition and summary")
    p.add_argument("data", nargs="?")
    p.add_argument("--preset", choices=sorted(fio.PRESETS))
    p.add_argument("--iterations", type=int)
    p.add_argument("--emit-default-config", action="store_true",
                   help="print the default config (or --preset's) and exit")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out")

    p = sub.add_parser("partition", help="recompute the optimal partition from a trace")
    p.add_argument("trace")
    _common(p)

    p = sub.add_parser("diagnose", help="trace series, autocorrelation and effective sample size")
    p.add_argument("trace")
    p.add_argument("--partition", help="group series by this partition instead of trace cluster ids")
    p.add_argument("--max-lag", type=int, default=20)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pp-check", help="posterior predictive check of aggregate competition")
    p.add_argument("trace")
    p.add_argument("partition")
    p.add_argument("data")
    p.add_argument("--reps", type=int, help="replicates per retained sample")
    _common(p)
    return ap


def run(args) -> int:
    if args.command == "simulate":
        study = pipeline.load_study(args.study, args.atoms)
        paths = pipeline.simulate_cmd(study, args.N, args.n, 1 if args.seed is None else args.seed, args.out)
        print(f"wrote {paths['data']} and {paths['truth']}")
    elif args.command == "fit":
        if args.emit_default_config:
            sys.stdout.write(fio.dump_config(fio.default_config(args.preset or "vague")))
            return 0
        if not args.data or not args.out:
            raise SystemExit("fit needs DATA and --out (or --emit-default-config)")
        summary = pipeline.fit_cmd(args.data, _config(args), args.out,
                                   progress_every=500 if args.verbose else 0)
        print(f"modal N*={summary['chain']['n_star_mode']}, "
              f"C* has {summary['partition']['n_clusters']} clusters (K*={summary['partition']['K_star']}); "
              f"wrote {args.out}")
    elif args.command == "partition":
        part = pipeline.partition_cmd(args.trace, _config(args), args.out)
        print(f"{part.n_clusters} clusters at K*={part.K_star} (score {part.score:.6g})")
    elif args.command == "diagnose":
        diags = pipeline.diagnose_cmd(args.trace, args.out, args.partition, args.max_lag)
        print(f"{len(diags)} series summarised in {args.out}")
    elif args.command == "pp-check":
        checks = pipeline.pp_check_cmd(args.trace, args.partition, args.data, _config(args), args.out)
        for g, c in sorted(checks.items()):
            print(f"cluster {g}: AC={c.observed:.4g} band=({c.band[0]:.4g}, {c.band[1]:.4g}) p={c.p_value:.3f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (fio.DataError, DomainError, ChainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
