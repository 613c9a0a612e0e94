"""Command-line front end: ``osgp run|batch|gen-data|aggregate``."""

from __future__ import annotations

import argparse
import glob
import logging
import sys

import numpy as np

from . import experiment, problems
from .interp import Dataset


def _cmd_run(args) -> int:
    cfg = experiment.parse_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = args.out
    cfg = cfg.replace(**changes)
    result = experiment.execute(cfg)
    path = experiment.emit_logs(result, cfg.output_dir)
    print(f"{path}: {result.termination} after {result.evaluations} evaluations, "
          f"best quality {result.best_quality!r}")
    return 0


def _cmd_batch(args) -> int:
    spec = experiment.parse_batch(args.spec)
    if args.workers is not None:
        spec.workers = args.workers
    results, rows = experiment.batch(spec)
    for r in results:
        if r.error:
            print(f"FAILED {r.config.crossover} seed {r.config.seed}: {r.error}", file=sys.stderr)
    for row in rows:
        print(f"{row['kind']}: {row['runs'] - row['failed']}/{row['runs']} runs, "
              f"median final quality {row.get('median_final_quality', 'n/a')}")
    return 1 if any(r.error for r in results) else 0


def _cmd_gen_data(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.problem == "poly10":
        ds = problems.gen_poly10(rng, args.count or 100)
    elif args.problem == "mackey_glass":
        ds = problems.lag_embed(problems.gen_mackey_glass((args.count or 928) + max(problems.MG_LAGS)),
                                count=args.count or 928)
    elif args.problem == "mackey_glass_series":
        series = problems.gen_mackey_glass(args.count or 2000)
        ds = Dataset(("x",), series[:, None], 0)
    elif args.problem == "classification":
        ds = problems.gen_classification(rng, args.count or 569)
    else:
        raise ValueError(f"unknown problem {args.problem!r}")
    problems.write_csv(ds, args.out)
    print(f"wrote {ds.n_rows} rows to {args.out}")
    return 0


def _cmd_aggregate(args) -> int:
    files = sorted(glob.glob(args.pattern))
    if not files:
        raise FileNotFoundError(f"no files match {args.pattern!r}")
    rows = experiment.aggregate(files, args.quantity, args.step, args.until)
    experiment.write_aggregate(rows, args.out)
    print(f"wrote {len(rows)} grid points from {rows[0]['runs']} runs to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osgp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("batch", help="run every crossover kind x repetition of a batch spec")
    p.add_argument("spec")
    p.add_argument("--workers", type=int, help="override the worker count")
    p.set_defaults(func=_cmd_batch)

    p = sub.add_parser("gen-data", help="write a benchmark dataset as CSV")
    p.add_argument("problem",
                   choices=("poly10", "mackey_glass", "mackey_glass_series", "classification"))
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, help="rows (or series length)")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("aggregate", help="resample run logs onto a shared evaluations grid")
    p.add_argument("quantity", choices=experiment.QUANTITIES)
    p.add_argument("pattern", help="glob of per-run CSV files (quote it)")
    p.add_argument("out")
    p.add_argument("--step", type=int, default=1000)
    p.add_argument("--until", choices=("longest", "shortest"), default="longest")
    p.set_defaults(func=_cmd_aggregate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, IndexError) as e:
        print(f"osgp {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
