"""Experiment front end: run / eval / report / check subcommands."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .agent import evaluate
from .config import ConfigError, load_config
from .report import build_report, emit_plot_script, format_csv, format_table
from .selfcheck import run_all_checks
from .training import restore_policy, train

log = logging.getLogger("lagrange_rl")


def _setup_logging() -> None:
    level = os.environ.get("LAGRANGE_RL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"{args.config}: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 2
    out = train(cfg, args.out, args.seed, budget_override=args.budget_override)
    print(f"run finished: {out}")
    print((out / "final_report.txt").read_text(), end="")
    return 0


def cmd_eval(args) -> int:
    cfg, ckpt = restore_policy(args.run_dir)
    env = cfg.make_env()
    constraint = cfg.constraint_spec()
    policy_spec = cfg.policy_spec(env)
    rng = np.random.default_rng(args.seed)
    if args.z_grid:
        z_values: list[float | None] = [float(t) for t in args.z_grid.split(",") if t.strip()]
    else:
        z_values = cfg.eval_z_values() or [None]
    for z in z_values:
        stats = evaluate(policy_spec, ckpt["policy_params"], env, constraint,
                         args.episodes, rng, z=z)
        tag = "" if z is None else f"z={z:g} "
        print(tag + " ".join(f"{k}={v:.6f}" for k, v in sorted(stats.items())))
    return 0


def cmd_report(args) -> int:
    records, warnings = build_report(args.run_dirs)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if not records:
        print("no usable runs", file=sys.stderr)
        return 1
    print(format_table(records), end="")
    if args.csv:
        Path(args.csv).write_text(format_csv(records))
        print(f"wrote {args.csv}")
    if args.emit_plot_script:
        emit_plot_script(args.emit_plot_script, args.run_dirs)
        print(f"wrote {args.emit_plot_script}")
    return 0


def cmd_check(args) -> int:
    results = run_all_checks()
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagrange-rl",
        description="Constrained RL experiments: cost minimization under reward bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train an agent from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--budget-override", type=int, default=None,
                       help="override run.budget learner steps")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate the final checkpoint of a run")
    p_eval.add_argument("--run-dir", required=True)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--episodes", type=int, default=5)
    p_eval.add_argument("--z-grid", default="",
                        help="comma-separated bound values for conditional policies")
    p_eval.set_defaults(func=cmd_eval)

    p_report = sub.add_parser("report", help="tabulate finished runs")
    p_report.add_argument("run_dirs", nargs="+")
    p_report.add_argument("--csv", default="", help="also write the table as CSV")
    p_report.add_argument("--emit-plot-script", default="",
                          help="write a matplotlib script that reads the metrics CSVs")
    p_report.set_defaults(func=cmd_report)

    p_check = sub.add_parser("check", help="run the numerical property suite")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
