"""Seeded benchmark plans, hyperparameter sweeps and their on-disk artifacts.

Layout written by :func:`run_benchmark`::

    <out>/<scenario>/<method>/<seed>/result.json
    <out>/<scenario>/<method>/<seed>/trace.csv
    <out>/report.json
    <out>/report.csv
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from .baselines import FdConfig, HeuristicCost, MppiConfig, run_fd_svgd, run_gradient_ascent, run_mppi
from .optimizer import RunResult, SvpioConfig, run_svpio
from .scenarios import resolve
from .traces import write_trace_csv

METHODS = ("svpio", "mppi", "gd", "fd-svgd")


class PlanError(ValueError):
    pass


def _pick(cls, cfg):
    names = {f.name for f in fields(cls)}
    return {k: v for k, v in cfg.items() if k in names}


def _check_keys(method, cfg, allowed):
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise PlanError(f"{method}: unknown option(s) {', '.join(unknown)}")


def method_config(scenario, method, overrides=None) -> dict:
    """Scenario defaults for ``method`` with ``overrides`` on top.

    Gradient ascent inherits iterations, step and temperature from the
    scenario's svpio table so the ablation runs with matched constants.
    """
    if method not in METHODS:
        raise PlanError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    cfg = {}
    if method == "gd":
        sv = scenario.solver.get("svpio", {})
        for k_src, k_dst in (("iterations", "iterations"), ("epsilon", "step_size"), ("lam", "lam"),
                             ("beta", "beta")):
            if k_src in sv:
                cfg[k_dst] = sv[k_src]
    cfg.update(scenario.solver.get(method, {}))
    cfg.update(overrides or {})
    return cfg


_SVPIO_KEYS = [f.name for f in fields(SvpioConfig) if f.name != "seed"] + ["beta"]
_GD_KEYS = ["iterations", "step_size", "lam", "beta"]
_MPPI_KEYS = [f.name for f in fields(MppiConfig) if f.name != "seed"] + \
    [f"cost_{f.name}" for f in fields(HeuristicCost)]
_FD_KEYS = [f.name for f in fields(SvpioConfig) if f.name != "seed"] + ["fd_delta"]


def run_method(scenario, method: str, seed: int, overrides=None) -> RunResult:
    cfg = method_config(scenario, method, overrides)
    if method == "svpio":
        _check_keys(method, cfg, _SVPIO_KEYS)
        return run_svpio(scenario, SvpioConfig(**_pick(SvpioConfig, cfg), seed=seed), cfg.get("beta"))
    if method == "gd":
        _check_keys(method, cfg, _GD_KEYS)
        default = SvpioConfig()
        step = cfg.get("step_size")
        if step is None:
            step = default.step_size(scenario.dynamics.lower, scenario.dynamics.upper)
        return run_gradient_ascent(scenario, int(cfg.get("iterations", default.iterations)), step, seed,
                                   float(cfg.get("lam", default.lam)), cfg.get("beta"))
    if method == "mppi":
        _check_keys(method, cfg, _MPPI_KEYS)
        cost = HeuristicCost(**{k[5:]: v for k, v in cfg.items() if k.startswith("cost_")})
        return run_mppi(scenario, MppiConfig(**_pick(MppiConfig, cfg), seed=seed), cost)
    _check_keys(method, cfg, _FD_KEYS)
    fd = FdConfig(cfg["fd_delta"]) if "fd_delta" in cfg else FdConfig()
    return run_fd_svgd(scenario, SvpioConfig(**_pick(SvpioConfig, cfg), seed=seed), fd)


# ------------------------------------------------------------ plans

@dataclass
class BenchmarkPlan:
    scenarios: list
    methods: list
    seeds: list
    overrides: dict = field(default_factory=dict)  # method -> {option: value}
    out: str = "out"
    workers: int = 1

    def __post_init__(self):
        self.scenarios = list(self.scenarios)
        self.methods = list(self.methods)
        self.seeds = [int(s) for s in self.seeds]
        if not self.scenarios:
            raise PlanError("plan lists no scenarios")
        if not self.methods:
            raise PlanError("plan lists no methods")
        if not self.seeds:
            raise PlanError("plan lists no seeds")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise PlanError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
        if len(set(self.seeds)) != len(self.seeds):
            raise PlanError("seed list has duplicates")
        if self.workers < 1:
            raise PlanError("workers must be at least 1")

    def cells(self):
        return [(s, m, k) for s in self.scenarios for m in self.methods for k in self.seeds]


def _seeds_from(v):
    if isinstance(v, dict):
        return list(range(int(v.get("start", 0)), int(v["stop"])))
    if isinstance(v, int):
        return list(range(v))
    return list(v)


def plan_from_dict(d: dict) -> BenchmarkPlan:
    try:
        scen = d["scenarios"] if "scenarios" in d else [d["scenario"]]
        methods = d["methods"] if "methods" in d else [d["method"]]
        seeds = _seeds_from(d["seeds"])
    except KeyError as e:
        raise PlanError(f"plan: missing field {e.args[0]!r}") from None
    return BenchmarkPlan(scen, methods, seeds, d.get("overrides", {}), d.get("out", "out"),
                         int(d.get("workers", 1)))


def load_plan(path) -> BenchmarkPlan:
    with open(path, "rb") as fh:
        return plan_from_dict(tomli.load(fh))


# ------------------------------------------------------------ execution

@dataclass
class Cell:
    scenario: str
    method: str
    seed: int
    result: RunResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_cell(scenarios, plan_overrides, key, extra=None):
    name, method, seed = key
    try:
        ov = dict(plan_overrides.get(method, {}))
        ov.update(extra or {})
        res = run_method(scenarios[name], method, seed, ov)
        if not math.isfinite(res.robustness):
            return Cell(name, method, seed, res, "non-finite robustness")
        return Cell(name, method, seed, res)
    except Exception as e:  # recorded per cell, the sweep carries on
        return Cell(name, method, seed, None, f"{type(e).__name__}: {e}")


def _execute(plan: BenchmarkPlan, workers: int, extra=None) -> list:
    scenarios = {name: resolve(name) for name in plan.scenarios}
    keys = plan.cells()
    if workers <= 1:
        return [_run_cell(scenarios, plan.overrides, k, extra) for k in keys]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map keeps submission order, so the reduction below is schedule independent
        return list(pool.map(lambda k: _run_cell(scenarios, plan.overrides, k, extra), keys))


@dataclass
class AggregateRow:
    scenario: str
    method: str
    runs: int
    errors: int
    mean_robustness: float
    median_robustness: float
    satisfaction_rate: float
    mean_runtime_s: float
    particles: int
    iterations: int
    evaluations: float
    best_seed: int | None
    best_trace: str | None


@dataclass
class AggregateReport:
    rows: list
    cells: list

    @property
    def errored(self) -> list:
        return [c for c in self.cells if not c.ok]

    def row(self, scenario, method) -> AggregateRow:
        for r in self.rows:
            if r.scenario == scenario and r.method == method:
                return r
        raise KeyError((scenario, method))

    def to_json(self) -> dict:
        det, timing = [], []
        for r in self.rows:
            d = asdict(r)
            timing.append({"scenario": r.scenario, "method": r.method, "mean_runtime_s": d.pop("mean_runtime_s")})
            det.append(d)
        errors = [{"scenario": c.scenario, "method": c.method, "seed": c.seed, "error": c.error}
                  for c in self.errored]
        return {"rows": det, "errors": errors, "timing": timing}

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f.name for f in fields(AggregateRow)]
        w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(asdict(r))
        return buf.getvalue()


def _size(res: RunResult, method):
    c = res.config
    if method == "mppi":
        return int(c.get("samples", 0)), int(c.get("iterations", 0))
    if method == "gd":
        return 1, int(c.get("iterations", 0))
    return int(c.get("particles", 0)), int(c.get("iterations", 0))


def aggregate(cells: list, trace_root: Path | None = None) -> AggregateReport:
    groups = {}
    for c in cells:
        groups.setdefault((c.scenario, c.method), []).append(c)
    rows = []
    for (name, method), group in groups.items():
        good = [c for c in group if c.ok]
        rho = np.array([c.result.robustness for c in good])
        if good:
            best = good[int(np.argmax(rho))]
            particles, iterations = _size(best.result, method)
            trace = None
            if trace_root is not None:
                trace = f"{name}/{method}/{best.seed}/trace.csv"
            row = AggregateRow(
                name, method, len(group), len(group) - len(good), float(rho.mean()), float(np.median(rho)),
                float(np.mean(rho > 0)), float(np.mean([c.result.wall_time_s for c in good])),
                particles, iterations, float(np.mean([c.result.evaluations for c in good])), best.seed, trace)
        else:
            nan = float("nan")
            row = AggregateRow(name, method, len(group), len(group), nan, nan, 0.0, nan, 0, 0, 0.0, None, None)
        rows.append(row)
    return AggregateReport(rows, cells)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_cell(cell: Cell, root: Path):
    d = root / cell.scenario / cell.method / str(cell.seed)
    d.mkdir(parents=True, exist_ok=True)
    if cell.ok or cell.result is not None:
        payload = cell.result.to_json()
        if cell.error:
            payload["error"] = cell.error
        (d / "result.json").write_text(_dump(payload))
        write_trace_csv(cell.result.states, d / "trace.csv")
    else:
        (d / "result.json").write_text(_dump({"scenario": cell.scenario, "method": cell.method,
                                              "seed": cell.seed, "error": cell.error}))


def run_benchmark(plan: BenchmarkPlan, workers: int | None = None, write: bool = True) -> AggregateReport:
    """Run every (scenario, method, seed) cell and reduce in plan order."""
    cells = _execute(plan, workers or plan.workers)
    root = Path(plan.out)
    report = aggregate(cells, root if write else None)
    if write:
        root.mkdir(parents=True, exist_ok=True)
        for c in cells:
            write_cell(c, root)
        (root / "report.json").write_text(_dump(report.to_json()))
        (root / "report.csv").write_text(report.to_csv())
    return report


# ------------------------------------------------------------ sweeps

@dataclass
class GridPoint:
    scenario: str
    method: str
    params: dict
    mean_robustness: float
    satisfaction_rate: float
    mean_runtime_s: float
    errors: int
    flagged: bool


@dataclass
class SweepResult:
    table: list  # GridPoint
    best: dict  # (scenario, method) -> GridPoint

    def to_json(self) -> dict:
        rows = [asdict(p) for p in self.table]
        best = [asdict(p) for p in self.best.values() if p is not None]
        # runtimes only inform tie-breaks; keep them out of the comparable payload
        for r in rows + best:
            r.pop("mean_runtime_s")
        return {"grid": rows, "best": best}


def grid_points(grid: dict, method: str) -> list:
    """Cartesian product of the grid table for ``method`` (or of a flat grid)."""
    table = grid.get(method, grid if not any(m in grid for m in METHODS) else {})
    if not table:
        return [{}]
    keys = sorted(table)
    vals = [v if isinstance(v, list) else [v] for v in (table[k] for k in keys)]
    if any(len(v) == 0 for v in vals):
        raise PlanError(f"{method}: empty grid axis")
    return [dict(zip(keys, combo)) for combo in itertools.product(*vals)]


def _select(points):
    ok = [p for p in points if not p.flagged]
    if not ok:
        return None
    # highest mean robustness, then satisfaction rate, then the faster config
    return min(ok, key=lambda p: (-p.mean_robustness, -p.satisfaction_rate, p.mean_runtime_s))


def sweep(plan: BenchmarkPlan, grid: dict, workers: int | None = None) -> SweepResult:
    workers = workers or plan.workers
    table, best = [], {}
    for name in plan.scenarios:
        for method in plan.methods:
            pts = []
            sub = BenchmarkPlan([name], [method], plan.seeds, plan.overrides, plan.out, plan.workers)
            for params in grid_points(grid, method):
                cells = _execute(sub, workers, params)
                good = [c for c in cells if c.ok]
                rho = np.array([c.result.robustness for c in good]) if good else np.array([np.nan])
                errors = len(cells) - len(good)
                pts.append(GridPoint(name, method, params, float(rho.mean()), float(np.mean(rho > 0)),
                                     float(np.mean([c.result.wall_time_s for c in good])) if good else float("nan"),
                                     errors, errors > 0 or not np.all(np.isfinite(rho))))
            table += pts
            best[(name, method)] = _select(pts)
    return SweepResult(table, best)


def load_grid(path) -> dict:
    with open(path, "rb") as fh:
        return tomli.load(fh)


def write_sweep(res: SweepResult, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "sweep.json").write_text(_dump(res.to_json()))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "method", "params", "mean_robustness", "satisfaction_rate",
                "mean_runtime_s", "errors", "flagged", "selected"])
    chosen = {id(p) for p in res.best.values() if p is not None}
    for p in res.table:
        w.writerow([p.scenario, p.method, json.dumps(p.params, sort_keys=True), p.mean_robustness,
                    p.satisfaction_rate, p.mean_runtime_s, p.errors, p.flagged, id(p) in chosen])
    (root / "sweep.csv").write_text(buf.getvalue())

