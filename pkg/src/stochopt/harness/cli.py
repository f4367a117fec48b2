"""Command-line entry point: ``stochopt {run,reference,sampler-demo,partition-demo}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigurationError
from ..operators import save_array
from ..sampling import Sampler
from .config import load_config
from .experiment import run_experiment, write_outputs
from .problems import PARTITION_MODES, partition
from .reference import compute_reference

SAMPLERS = ("sequential", "staggered", "herman_meyer", "random_with_replacement", "random_without_replacement")


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="sampler / random seed override")
    p.add_argument("--output-dir", type=Path, default=Path("results"), help="directory for outputs")
    p.add_argument("--log-level", default="WARNING", help="logging level (DEBUG, INFO, ...)")


def build_parser():
    parser = argparse.ArgumentParser(prog="stochopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a TOML/JSON config")
    p.add_argument("config", type=Path)
    p.add_argument("--passes", type=int, default=None, help="data-pass budget override")
    _common(p)

    p = sub.add_parser("reference", help="compute (or load cached) reference solution")
    p.add_argument("config", type=Path)
    p.add_argument("--passes", type=int, default=None, help="iteration budget override for the solve")
    _common(p)

    p = sub.add_parser("sampler-demo", help="print a sampler's index sequence as CSV")
    p.add_argument("--strategy", choices=SAMPLERS, default="random_with_replacement")
    p.add_argument("--num-indices", type=int, default=8)
    p.add_argument("--calls", type=int, default=16)
    p.add_argument("--stride", type=int, default=2)
    p.add_argument("--passes", type=int, default=None, help="number of epochs (overrides --calls)")
    _common(p)

    p = sub.add_parser("partition-demo", help="print subset membership of a partition as CSV")
    p.add_argument("--count", type=int, default=9)
    p.add_argument("--subsets", type=int, default=3)
    p.add_argument("--mode", choices=PARTITION_MODES, default="staggered")
    p.add_argument("--passes", type=int, default=None, help="unused; accepted for uniformity")
    _common(p)
    return parser


def _overrides(args, config):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.passes is not None:
        changes["passes" if args.command == "run" else "reference_max_iterations"] = args.passes
    return config.replace(**changes) if changes else config


def _sampler(args):
    n = args.num_indices
    if args.strategy == "staggered":
        return Sampler.staggered(n, args.stride)
    if args.strategy == "sequential":
        return Sampler.sequential(n)
    if args.strategy == "herman_meyer":
        return Sampler.herman_meyer(n)
    seed = 0 if args.seed is None else args.seed
    if args.strategy == "random_with_replacement":
        return Sampler.random_with_replacement(n, seed=seed)
    return Sampler.random_without_replacement(n, seed=seed)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    out = args.output_dir
    try:
        if args.command in ("run", "reference"):
            config = _overrides(args, load_config(args.config))
            cache = out / "cache"
            if args.command == "run":
                record = run_experiment(config, cache_dir=cache)
                write_outputs(record, out)
                final = record.final
                print(f"passes={float(final['data_passes']):.4g} objective={final['objective']:.10g} "
                      f"nrmse={final['nrmse']:.6g} -> {out}")
            else:
                sol = compute_reference(config, cache_dir=cache)
                out.mkdir(parents=True, exist_ok=True)
                shape = (config.grid, config.grid) if config.problem in ("ct_tv", "pet_rdp") else None
                save_array(out / "reference.txt", sol.x, shape=shape)
                (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))
                print(f"reference converged={sol.converged} iterations={sol.iterations} -> {out / 'reference.txt'}")
        elif args.command == "sampler-demo":
            sampler = _sampler(args)
            calls = args.calls if args.passes is None else args.passes * args.num_indices
            w = csv.writer(sys.stdout)
            w.writerow(["call_index", "sampled_index"])
            for k, idx in enumerate(sampler.sequence(calls)):
                w.writerow([k, idx])
        else:
            groups = partition(args.count, args.subsets, args.mode, seed=args.seed)
            w = csv.writer(sys.stdout)
            w.writerow(["subset", "index"])
            for s, group in enumerate(groups):
                for idx in group:
                    w.writerow([s, int(idx)])
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
