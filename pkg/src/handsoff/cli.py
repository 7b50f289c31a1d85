"""Command-line front end.

    handsoff run --case 1 --method all --samples 2000 --out runs/
    handsoff run --config my_plant.json --method clot
    handsoff table runs/case1_N2000 runs/case2_N2000 --csv table.csv
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from handsoff.experiments import (
    CASES,
    REALIZATIONS,
    ConfigError,
    builtin_case,
    emit_table,
    load_config,
    run_case,
)
from handsoff.solver import InfeasibleError, RankDeficientError
from handsoff.sparsity import METHODS

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="handsoff", description="Sparse (hands-off) optimal control experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve built-in cases or a config file")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--case", action="append",
                     help=f"built-in case number 1-{len(CASES)} or 'all' (repeatable)")
    src.add_argument("--config", type=Path, help="JSON experiment file")
    run.add_argument("--method", default="all", choices=METHODS + ("all",))
    run.add_argument("--samples", type=int, action="append",
                     help="number of samples N (repeatable; default from the config)")
    run.add_argument("--threshold", type=float, help="zero threshold for densities")
    run.add_argument("--horizon", type=float, help="override the horizon T in seconds")
    run.add_argument("--realization", choices=REALIZATIONS, help="state-space realization")
    run.add_argument("--rho", type=float, help="ADMM penalty")
    run.add_argument("--max-iter", type=int, help="ADMM iteration limit")
    run.add_argument("--eps-abs", type=float, help="ADMM residual tolerance")
    run.add_argument("--eps-feas", type=float, help="terminal constraint tolerance")
    run.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="cases solved in parallel")

    table = sub.add_parser("table", help="merge run summaries into a density table")
    table.add_argument("run_dirs", nargs="*", type=Path)
    table.add_argument("--csv", type=Path, help="write the merged summary here")
    return p


def _configs(args) -> list:
    if args.config is not None:
        configs = [load_config(args.config)]
    else:
        ids = []
        for item in args.case:
            if item == "all":
                ids.extend(CASES)
            else:
                ids.append(item)
        configs = [builtin_case(c) for c in ids]

    overrides = {}
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.horizon is not None:
        overrides["T"] = args.horizon
    if args.realization is not None:
        overrides["realization"] = args.realization
    if args.method != "all":
        overrides["methods"] = (args.method,)
    solver = {k: v for k, v in (("rho", args.rho), ("max_iter", args.max_iter),
                                 ("eps_abs", args.eps_abs), ("eps_feas", args.eps_feas)) if v is not None}
    out = []
    for cfg in configs:
        extra = dict(overrides)
        if solver:
            extra["solver"] = {**cfg.solver, **solver}
        out.append(replace(cfg, **extra) if extra else cfg)
    return out


def _run_one(cfg, out_dir, N):
    try:
        return str(run_case(cfg, out_dir, N=N)), None
    except InfeasibleError as exc:
        return None, f"{cfg.label} N={N}: infeasible: {exc}"


def _cmd_run(args) -> int:
    try:
        configs = _configs(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    jobs = [(cfg, N) for cfg in configs for N in (args.samples or [cfg.N])]
    for cfg, N in jobs:
        if N < 1:
            print(f"config error: --samples must be positive, got {N}", file=sys.stderr)
            return EXIT_CONFIG

    results = []
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = [pool.submit(_run_one, cfg, args.out, N) for cfg, N in jobs]
                results = [f.result() for f in futures]
        else:
            results = [_run_one(cfg, args.out, N) for cfg, N in jobs]
    except RankDeficientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    failed = False
    done = []
    for run_dir, err in results:
        if err:
            print(err, file=sys.stderr)
            failed = True
        else:
            done.append(run_dir)
            print(run_dir)
    if done:
        _, text = emit_table(done)
        print(text)
    return EXIT_INFEASIBLE if failed else EXIT_OK


def _cmd_table(args) -> int:
    try:
        _, text = emit_table(args.run_dirs, args.csv)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if text:
        print(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_table(args)


if __name__ == "__main__":
    sys.exit(main())
