"""Regenerate the built-in scenario files and their witness trajectories.

Writes ``src/stlstein/data/<name>.toml`` and ``<name>_witness.csv``. A
witness is the best trajectory found by svpio over a few seeds; the script
refuses to write one that does not satisfy its formula.

    python scripts/make_scenarios.py [--only corridor] [--seeds 5]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from stlstein.dynamics import DynamicsSpec
from stlstein.optimizer import SvpioConfig, run_svpio
from stlstein.scenarios import (Box, Circle, Geometry, audit, check_trajectory, make_scenario,
                                save_scenario)
from stlstein.traces import write_trace_csv

DATA = Path(__file__).resolve().parents[1] / "src" / "stlstein" / "data"


def reach_avoid():
    g = Geometry([Circle("obs", (1.5, 1.5), 0.5)], [Box("goal", (3.0, 3.0), (0.5, 0.5))])
    solver = {
        "svpio": {"particles": 10, "iterations": 20, "lam": 0.1},
        "mppi": {"samples": 10, "iterations": 200, "temperature": 1.0, "sigma": 0.5},
        "fd-svgd": {"particles": 10, "iterations": 20, "lam": 0.1},
    }
    return make_scenario("reach_avoid", "reach_avoid", g, DynamicsSpec(), (0, 0, 0, 0), 50, solver=solver)


LH_OBSTACLES = [(1.2, 0.2, 0.45), (1.2, 1.5, 0.45), (2.6, -0.5, 0.45), (2.6, 0.9, 0.45),
                (2.6, 2.3, 0.45), (4.0, 0.2, 0.45), (4.0, 1.6, 0.45)]
LH_GOALS = [(5.0, 1.0, 0.5), (0.0, 2.6, 0.5)]


def long_horizon():
    g = Geometry([Circle(f"o{k}", (x, y), r) for k, (x, y, r) in enumerate(LH_OBSTACLES)],
                 [Circle(f"g{k}", (x, y), r) for k, (x, y, r) in enumerate(LH_GOALS)])
    dyn = DynamicsSpec(dt=0.1, u_min=(-1.0, -1.0), u_max=(1.0, 1.0))
    solver = {
        "svpio": {"particles": 10, "iterations": 600, "epsilon": 0.05, "lam": 0.3},
        "fd-svgd": {"particles": 10, "iterations": 600, "epsilon": 0.05, "lam": 0.3},
    }
    return make_scenario("long_horizon", "long_horizon", g, dyn, (0, 0, 0, 0), 600, solver=solver)


def button_order():
    obs = [Circle("o0", (1.5, 0.0), 0.45), Circle("o1", (1.5, 1.6), 0.4)]
    zones = [Box("A", (3.0, 0.0), (0.35, 0.35)), Box("B", (0.5, 3.0), (0.3, 0.3)),
             Box("C", (3.0, 3.0), (0.35, 0.35))]
    g = Geometry(obs, zones, [], {"A": "A", "B": "B", "C": "C"})
    dyn = DynamicsSpec("multi_agent_double_integrator", 2)
    solver = {"svpio": {"particles": 10, "iterations": 100, "epsilon": 0.4, "lam": 0.03}}
    return make_scenario("button_order", "button_order", g, dyn, (0, 0, 0, 0, 0, 2, 0, 0), 60,
                         gate="prose", solver=solver)


def sync_goals(m=4, radius=2.0):
    ang = np.linspace(0, 2 * np.pi, m, endpoint=False) + np.pi / 2
    starts = [(round(radius * np.cos(a), 3), round(radius * np.sin(a), 3)) for a in ang]
    # every agent heads to the antipode of its start, so paths cross near the origin
    goals = [Circle(f"goal{i}", (-x + 0.0, -y + 0.0), 0.3) for i, (x, y) in enumerate(starts)]
    g = Geometry([], goals, [], {"goals": [z.name for z in goals]})
    x0 = [c for (x, y) in starts for c in (x, y, 0.0, 0.0)]
    dyn = DynamicsSpec("multi_agent_double_integrator", m)
    solver = {"svpio": {"particles": 16, "iterations": 150, "epsilon": 0.1, "lam": 0.03}}
    return make_scenario("sync_goals", "sync_goals", g, dyn, x0, 60, delta=5, r_col=0.15, solver=solver)


def corridor(m=2, gap=0.25, half_width=0.3, spread=1.5, start_x=-2.0):
    walls = [Box("wall_up", (0.0, gap + 2.5), (half_width, 2.5)),
             Box("wall_lo", (0.0, -gap - 2.5), (half_width, 2.5))]
    g = Geometry([], [Box("corridor", (0.0, 0.0), (half_width, gap))], walls, {"corridor": "corridor"})
    ys = np.linspace(spread, -spread, m)
    x0 = [c for y in ys for c in (start_x, float(y), 0.0, 0.0)]
    dyn = DynamicsSpec("multi_agent_double_integrator", m)
    solver = {
        "svpio": {"particles": 16, "iterations": 100, "epsilon": 0.2, "lam": 0.1},
        "fd-svgd": {"particles": 16, "iterations": 100, "epsilon": 0.2, "lam": 0.1},
    }
    return make_scenario("corridor", "corridor", g, dyn, x0, 60, r_col=0.15, solver=solver)


BUILDERS = {f.__name__: f for f in (reach_avoid, long_horizon, button_order, sync_goals, corridor)}


def find_witness(sc, seeds):
    cfg = {k: v for k, v in sc.solver["svpio"].items()}
    best = None
    for s in range(seeds):
        r = run_svpio(sc, SvpioConfig(**cfg, seed=s))
        if best is None or r.robustness > best.robustness:
            best = r
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", action="append", choices=sorted(BUILDERS))
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--no-witness", action="store_true")
    args = ap.parse_args()
    DATA.mkdir(parents=True, exist_ok=True)
    for name in args.only or BUILDERS:
        sc = BUILDERS[name]()
        issues = audit(sc)
        if issues:
            raise SystemExit(f"{name}: geometry/formula audit failed: {issues}")
        save_scenario(sc, DATA / f"{name}.toml")
        print(f"wrote {name}.toml")
        if args.no_witness:
            continue
        best = find_witness(sc, args.seeds)
        total, _ = check_trajectory(sc, best.states)
        if not total > 0:
            raise SystemExit(f"{name}: no satisfying witness in {args.seeds} seeds (best {total:.4f})")
        write_trace_csv(best.states, DATA / f"{name}_witness.csv")
        print(f"  witness seed {best.seed}: robustness {total:.4f}")


if __name__ == "__main__":
    main()
