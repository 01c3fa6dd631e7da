"""Command-line entry point: ``ttd run | check | oracle | curves``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from ..td_core import TdError
from .config import FIELDS, from_environ, load_config_file, merge_settings, spec_from_settings
from .equivalence import equivalence_report
from .experiment import run_experiment

# flags for `run`; each maps onto a config key
RUN_FLAGS = ("env", "algo", "lambda", "m", "gamma", "alpha", "beta", "temperature", "episodes",
             "runs", "seed", "engine", "step_cap", "episode_cap", "window", "resync")


def _add_run(sub) -> None:
    p = sub.add_parser("run", help="run a multi-seed experiment and write metric CSVs")
    p.add_argument("--preset", help="named parameter preset, e.g. car-l0.9 or cartpole")
    p.add_argument("--config", type=Path, help="flat 'key = value' settings file")
    for key in RUN_FLAGS:
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=FIELDS[key], default=None)
    p.add_argument("--seeds", type=FIELDS["seeds"], default=None, help="explicit seed list, e.g. 3,5,8")
    p.add_argument("--adaptive-lambda", dest="adaptive_lambda", action="store_true", default=None)
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _cmd_run(args) -> int:
    layers = []
    if args.preset:
        layers.append({"preset": args.preset})
    if args.config:
        layers.append(load_config_file(args.config))
    layers.append(from_environ())
    layers.append({k: getattr(args, k) for k in (*RUN_FLAGS, "seeds", "adaptive_lambda")})
    spec = spec_from_settings(merge_settings(*layers))
    result = run_experiment(spec, progress=args.verbose)
    for path in result.write(args.out):
        print(path)
    print(f"mean_first_success = {result.mean_first_success():g}")
    return 0


def _cmd_check(args) -> int:
    report = equivalence_report(args.trials, args.seed)
    print("\n".join(report.lines()))
    return 0 if report.passed else 1


def _cmd_oracle(args) -> int:
    from .oracle import shortest_parking_path

    res = shortest_parking_path(max_depth=args.max_depth, resolution=args.resolution)
    print(f"max_depth = {args.max_depth}")
    print(f"depth = {res.depth}")
    print(f"path = {' '.join(map(str, res.path))}")
    print(f"replay_ok = {res.replay_ok}")
    print(f"largest_layer = {max(res.layer_sizes, default=0)}")
    print(f"seconds = {res.seconds:.1f}")
    ok = res.depth is not None and res.replay_ok
    if args.expect is not None:
        ok = ok and res.depth == args.expect
        print(f"expected depth {args.expect}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_curves(args) -> int:
    with open(args.aggregate, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print(f"{args.aggregate}: no rows", file=sys.stderr)
        return 1
    cols = args.columns or [c for c in rows[0] if c != "episode"]
    missing = [c for c in cols if c not in rows[0]]
    if missing:
        print(f"unknown columns: {', '.join(missing)}", file=sys.stderr)
        return 1
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        out.write("# episode " + " ".join(cols) + "\n")
        for r in rows:
            out.write(" ".join([r["episode"], *(r[c] for c in cols)]) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttd", description="Truncated TD(lambda) experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)

    p = sub.add_parser("check", help="randomized TD-core equivalence checks")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("oracle", help="breadth-first shortest parking path from the fixed start")
    p.add_argument("--max-depth", type=int, default=21)
    p.add_argument("--resolution", type=float, default=1e-6)
    p.add_argument("--expect", type=int, default=None, help="fail unless the depth equals this")

    p = sub.add_parser("curves", help="aggregate CSV to whitespace-separated plot columns")
    p.add_argument("aggregate", type=Path)
    p.add_argument("--columns", nargs="+")
    p.add_argument("-o", "--output", type=Path)
    return parser


COMMANDS = {"run": _cmd_run, "check": _cmd_check, "oracle": _cmd_oracle, "curves": _cmd_curves}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (TdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
