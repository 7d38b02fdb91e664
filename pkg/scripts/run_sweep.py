"""Grid-search method options over a plan and print the selected point.

    python scripts/run_sweep.py scripts/plans/multiagent_sweep.toml scripts/plans/multiagent_grid.toml
"""

from __future__ import annotations

import argparse
import json

from stlstein.bench import load_grid, load_plan, sweep, write_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("plan")
    ap.add_argument("grid")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args(argv)

    plan = load_plan(args.plan)
    res = sweep(plan, load_grid(args.grid), workers=args.workers)
    write_sweep(res, plan.out)
    for (scen, method), best in res.best.items():
        if best is None:
            print(f"{scen}\t{method}\tno unflagged point")
        else:
            print(f"{scen}\t{method}\t{json.dumps(best.params)}\tmean {best.mean_robustness:.4f}"
                  f"\tsat {best.satisfaction_rate:.2f}")


if __name__ == "__main__":
    main()
