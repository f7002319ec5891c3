"""cavity-dw command line: run, validate, list-scenarios.

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""
import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .core import ConvergenceError, NumericalError
from .scenarios import (SCENARIOS, ConfigError, bundled_configs, load_config,
                        resolve_config_path, run_scenario)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _max_workers(n_jobs):
    try:
        cap = int(os.environ.get("CAVITY_DW_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, n_jobs))


def _run_one(path, out, seed_grid):
    try:
        cfg = load_config(resolve_config_path(path))
    except ConfigError as exc:
        return EXIT_CONFIG, [f"{path}: {e}" for e in exc.errors]
    try:
        outcome = run_scenario(cfg, out, seed_grid)
    except (NumericalError, ConvergenceError) as exc:
        return EXIT_NUMERICAL, [f"{path}: numerical failure: {exc}"]
    return EXIT_OK, [f"{path}: wrote {len(outcome.files)} files to {outcome.out_dir}"]


def cmd_run(args):
    configs = args.config
    jobs = []
    for c in configs:
        out = args.out
        if out and len(configs) > 1:
            # keep batch outputs disjoint
            out = str(Path(out) / Path(c).stem)
        jobs.append((c, out, args.seed_grid))
    workers = _max_workers(len(jobs))
    if workers == 1:
        results = [_run_one(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    for _, lines in results:
        for line in lines:
            print(line, file=sys.stderr)
    return max(code for code, _ in results)


def cmd_validate(args):
    try:
        cfg = load_config(resolve_config_path(args.config))
    except ConfigError as exc:
        for e in exc.errors:
            print(e, file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {cfg.scenario}")
    return EXIT_OK


def cmd_list(args):
    print("scenarios:")
    for s in SCENARIOS:
        print(f"  {s}")
    print("bundled configs:")
    for name in bundled_configs():
        print(f"  {name}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="cavity-dw", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one or more scenario configs")
    r.add_argument("config", nargs="+", help="config path or bundled config name")
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--seed-grid", choices=["coarse", "fine"], default="coarse")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    ls = sub.add_parser("list-scenarios", help="list scenario kinds and bundled configs")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
