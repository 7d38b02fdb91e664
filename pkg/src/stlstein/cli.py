"""Command-line entry point: run, bench, sweep, check, plot."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import tomli

from . import bench
from .plots import export_plots
from .scenarios import ScenarioError, check_trajectory, resolve
from .traces import read_trace_csv


def _cmd_run(args) -> int:
    sc = resolve(args.scenario)
    overrides = {}
    if args.config:
        with open(args.config, "rb") as fh:
            table = tomli.load(fh)
        # either a bare option table or one nested under the method name
        overrides = table.get(args.method, table)
    cell = bench._run_cell({args.scenario: sc}, {args.method: overrides}, (args.scenario, args.method, args.seed))
    if args.out:
        bench.write_cell(cell, Path(args.out))
    if not cell.ok:
        print(f"error: {cell.error}", file=sys.stderr)
        return 1
    r = cell.result
    print(json.dumps({"scenario": r.scenario, "method": r.method, "seed": r.seed,
                      "robustness": r.robustness, "satisfied": r.satisfied,
                      "evaluations": r.evaluations, "wall_time_s": round(r.wall_time_s, 3)}))
    return 0


def _print_report(report):
    cols = ("scenario", "method", "runs", "errors", "mean_robustness", "median_robustness",
            "satisfaction_rate", "mean_runtime_s")
    print("\t".join(cols))
    for row in report.rows:
        print("\t".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in (getattr(row, c) for c in cols)))
    for c in report.errored:
        print(f"error {c.scenario}/{c.method}/{c.seed}: {c.error}", file=sys.stderr)


def _cmd_bench(args) -> int:
    plan = bench.load_plan(args.plan)
    if args.out:
        plan.out = args.out
    report = bench.run_benchmark(plan, args.workers)
    _print_report(report)
    return 0 if not report.errored else 1


def _cmd_sweep(args) -> int:
    plan = bench.load_plan(args.plan)
    if args.out:
        plan.out = args.out
    res = bench.sweep(plan, bench.load_grid(args.grid), args.workers)
    bench.write_sweep(res, plan.out)
    for (name, method), p in res.best.items():
        if p is None:
            print(f"{name}\t{method}\tno valid configuration")
        else:
            print(f"{name}\t{method}\t{json.dumps(p.params, sort_keys=True)}\t"
                  f"mean={p.mean_robustness:.4g}\tsat={p.satisfaction_rate:.3g}")
    errored = any(p.errors for p in res.table)
    return 0 if not errored else 1


def _cmd_check(args) -> int:
    sc = resolve(args.scenario)
    states = read_trace_csv(args.trace)
    total, parts = check_trajectory(sc, states)
    for text, v in parts.items():
        print(f"{v:+.6f}  {text}")
    print(f"{total:+.17g}  (total)")
    return 0


def _cmd_plot(args) -> int:
    for p in export_plots(args.inp, args.out):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlstein", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="one (scenario, method, seed) cell")
    p.add_argument("--scenario", required=True, help="built-in name or scenario TOML path")
    p.add_argument("--method", required=True, choices=bench.METHODS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="TOML file of method options")
    p.add_argument("--out", help="write result.json and trace.csv under this directory")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("bench", help="run a benchmark plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("sweep", help="hyperparameter grid over a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("check", help="robustness of a recorded trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trace", required=True)
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("plot", help="SVG plots from a benchmark output directory")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, bench.PlanError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
