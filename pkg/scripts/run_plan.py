"""Run a benchmark plan, print its summary table and export SVG plots.

    python scripts/run_plan.py scripts/plans/reach_avoid.toml [--workers 4] [--no-plots]

Results go to the plan's ``out`` directory, plots to ``<out>/plots``.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from stlstein.bench import load_plan, run_benchmark
from stlstein.plots import export_plots


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("plan")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out")
    ap.add_argument("--no-plots", action="store_true")
    args = ap.parse_args(argv)

    plan = load_plan(args.plan)
    if args.out:
        plan.out = args.out
    report = run_benchmark(plan, workers=args.workers)

    print(f"{'scenario':<14}{'method':<9}{'runs':>5}{'err':>5}{'mean rho':>10}{'median':>10}{'sat':>7}{'time s':>9}")
    for r in report.rows:
        print(f"{r.scenario:<14}{r.method:<9}{r.runs:>5}{r.errors:>5}{r.mean_robustness:>10.4f}"
              f"{r.median_robustness:>10.4f}{r.satisfaction_rate:>7.2f}{r.mean_runtime_s:>9.2f}")
    for c in report.errored:
        print(f"error {c.scenario}/{c.method}/{c.seed}: {c.error}")

    if not args.no_plots:
        for p in export_plots(Path(plan.out), Path(plan.out) / "plots"):
            print("wrote", p)


if __name__ == "__main__":
    main()
