"""Task definitions: geometry + dynamics + predicates + formula.

Scenarios are stored as TOML (see ``docs/scenario_format.md``). The five
built-in tasks live in ``stlstein/data/*.toml`` and are generated from the
builders in this module by ``scripts/make_scenarios.py``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .dynamics import DynamicsSpec
from .predicates import PredicateDef
from .semantics import hard_batch
from .stl import (Always, And, Eventually, Interval, Not, Pred, Until, check,
                  conj, parse_formula, predicate_names, pretty_print)

BUILTINS = ("reach_avoid", "long_horizon", "button_order", "sync_goals", "corridor")
TASKS = BUILTINS


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Circle:
    name: str
    center: tuple
    radius: float


@dataclass(frozen=True)
class Box:
    name: str
    center: tuple
    half_extents: tuple


@dataclass
class Geometry:
    obstacles: list = field(default_factory=list)  # Circle
    zones: list = field(default_factory=list)  # Circle or Box
    walls: list = field(default_factory=list)  # Box
    # task-specific role of each zone, e.g. {"goal_0": "A"} or agent goal lists
    roles: dict = field(default_factory=dict)

    def zone(self, name):
        for z in self.zones:
            if z.name == name:
                return z
        raise ScenarioError(f"no zone named {name!r}")


@dataclass
class Scenario:
    name: str
    task: str
    dynamics: DynamicsSpec
    x0: tuple
    horizon: int
    predicates: dict
    formula_text: str
    geometry: Geometry
    delta: int | None = None
    r_col: float | None = None
    beta: float = 10.0
    gate: str = "prose"
    solver: dict = field(default_factory=dict)
    formula: object = None

    def __post_init__(self):
        self.x0 = tuple(float(v) for v in self.x0)
        if self.formula is None:
            self.formula = parse_formula(self.formula_text)
        if len(self.x0) != self.dynamics.n:
            raise ScenarioError(f"x0: expected {self.dynamics.n} entries, got {len(self.x0)}")
        for p in self.predicates.values():
            if any(i >= self.dynamics.agents for i in p.agents) and p.kind != "custom_affine":
                raise ScenarioError(f"predicates.{p.name}: agent index out of range")
            if p.state_dim_needed() > self.dynamics.n:
                raise ScenarioError(f"predicates.{p.name}: needs state dimension {p.state_dim_needed()}")
        try:
            check(self.formula, self.predicates, self.horizon)
        except ValueError as e:
            raise ScenarioError(f"formula: {e}") from e

    @property
    def agents(self) -> int:
        return self.dynamics.agents

    def with_solver(self, method, **overrides):
        solver = {k: dict(v) for k, v in self.solver.items()}
        solver.setdefault(method, {}).update(overrides)
        return replace(self, solver=solver)


# ------------------------------------------------------------ predicate helpers

def _avoid(i, o: Circle):
    return PredicateDef(f"avoid_a{i}_{o.name}", "circle_avoid", (i,), o.center, radius=o.radius)


def _inside(i, z):
    if isinstance(z, Box):
        return PredicateDef(f"in_a{i}_{z.name}", "box_in", (i,), z.center, half_extents=z.half_extents)
    return PredicateDef(f"in_a{i}_{z.name}", "circle_in", (i,), z.center, radius=z.radius)


def _separation(i, j, r_col):
    return PredicateDef(f"col_a{i}_a{j}", "pairwise_separation", (i, j), r_col=r_col)


class _Builder:
    def __init__(self):
        self.preds = {}

    def __call__(self, p: PredicateDef) -> Pred:
        self.preds[p.name] = p
        return Pred(p.name)


def build_task(task: str, geometry: Geometry, agents: int, H: int, delta: int | None = None,
               r_col: float | None = None, gate: str = "prose"):
    """Formula (flat top-level conjunction) and predicate bindings for a task kind."""
    P = _Builder()
    full = Interval(0, H)
    terms = []
    if task == "reach_avoid":
        terms += [Always(full, P(_avoid(0, o))) for o in geometry.obstacles]
        terms += [Eventually(full, P(_inside(0, z))) for z in geometry.zones]
    elif task == "long_horizon":
        for i in range(agents):
            terms += [Always(full, P(_avoid(i, o))) for o in geometry.obstacles]
        for i in range(agents):
            terms += [Eventually(full, P(_inside(i, z))) for z in geometry.zones]
    elif task == "button_order":
        if agents != 2:
            raise ScenarioError("button_order needs exactly two agents")
        A, B, C = (geometry.zone(geometry.roles.get(k, k)) for k in ("A", "B", "C"))
        for i in range(2):
            terms += [Always(full, P(_avoid(i, o))) for o in geometry.obstacles]
        terms.append(Eventually(full, P(_inside(0, A))))
        terms.append(Eventually(full, P(_inside(1, C))))
        if gate == "literal":
            # as printed: agent 2 stays out of C until agent 1 is in B
            terms.append(Until(full, Not(P(_inside(1, C))), P(_inside(0, B))))
        elif gate == "prose":
            # as described: agent 1 stays out of A until agent 2 presses B
            terms.append(Until(full, Not(P(_inside(0, A))), P(_inside(1, B))))
        else:
            raise ScenarioError(f"unknown gate variant {gate!r}")
    elif task == "sync_goals":
        if delta is None or r_col is None:
            raise ScenarioError("sync_goals needs delta and r_col")
        if 2 * delta >= H:
            raise ScenarioError(f"delta={delta} leaves an empty outer window for H={H}")
        goals = geometry.roles.get("goals") or [z.name for z in geometry.zones[:agents]]
        terms += [Always(full, P(_separation(i, j, r_col)))
                  for i in range(agents) for j in range(i + 1, agents)]
        reach = conj(Eventually(Interval(0, 2 * delta), P(_inside(i, geometry.zone(goals[i]))))
                     for i in range(agents))
        terms.append(Eventually(Interval(0, H - 2 * delta), reach))
    elif task == "corridor":
        if r_col is None:
            raise ScenarioError("corridor needs r_col")
        cor = geometry.zone(geometry.roles.get("corridor", "corridor"))
        terms += [Always(full, P(_separation(i, j, r_col)))
                  for i in range(agents) for j in range(i + 1, agents)]
        terms += [Always(full, Not(P(_inside(i, w)))) for i in range(agents) for w in geometry.walls]
        terms += [Eventually(full, P(_inside(i, cor))) for i in range(agents)]
        terms += [Eventually(full, P(PredicateDef(f"xpos_a{i}", "halfspace_x_ge", (i,), threshold=0.0)))
                  for i in range(agents)]
        terms += [Always(full, Not(And((P(_inside(i, cor)), P(_inside(j, cor))))))
                  for i in range(agents) for j in range(i + 1, agents)]
    else:
        raise ScenarioError(f"unknown task {task!r}")
    return conj(terms), P.preds


def build_formula(task: str, geometry: Geometry, H: int, delta: int | None = None,
                  agents: int = 1, r_col: float | None = None, gate: str = "literal"):
    return build_task(task, geometry, agents, H, delta, r_col, gate)[0]


def make_scenario(name, task, geometry, dynamics, x0, H, delta=None, r_col=None, beta=10.0,
                  gate="prose", solver=None) -> Scenario:
    formula, preds = build_task(task, geometry, dynamics.agents, H, delta, r_col, gate)
    return Scenario(name, task, dynamics, tuple(x0), H, preds, pretty_print(formula), geometry,
                    delta, r_col, beta, gate, solver or {}, formula)


# ------------------------------------------------------------ config format

def _shape_to_dict(s):
    if isinstance(s, Box):
        return {"name": s.name, "shape": "box", "center": list(s.center), "half_extents": list(s.half_extents)}
    return {"name": s.name, "shape": "circle", "center": list(s.center), "radius": s.radius}


def _shape_from_dict(d, where):
    try:
        if d.get("shape", "circle") == "box":
            return Box(d["name"], tuple(d["center"]), tuple(d["half_extents"]))
        return Circle(d["name"], tuple(d["center"]), float(d["radius"]))
    except KeyError as e:
        raise ScenarioError(f"{where}: missing field {e.args[0]!r}") from None


def _pred_to_dict(p: PredicateDef):
    d = {"name": p.name, "kind": p.kind, "agents": list(p.agents)}
    if p.kind in ("circle_avoid", "circle_in", "box_in"):
        d["center"] = list(p.center)
    if p.kind in ("circle_avoid", "circle_in"):
        d["radius"] = p.radius
    if p.kind == "box_in":
        d["half_extents"] = list(p.half_extents)
    if p.kind == "halfspace_x_ge":
        d["threshold"] = p.threshold
    if p.kind == "pairwise_separation":
        d["r_col"] = p.r_col
    if p.kind == "custom_affine":
        d["a"] = list(p.a)
        d["b"] = p.b
    return d


def scenario_to_dict(sc: Scenario) -> dict:
    m = sc.agents
    x0 = np.asarray(sc.x0).reshape(m, 4)
    d = {
        "name": sc.name,
        "task": sc.task,
        "horizon": sc.horizon,
        "beta": sc.beta,
        "gate": sc.gate,
        "formula": sc.formula_text,
    }
    if sc.delta is not None:
        d["delta"] = sc.delta
    if sc.r_col is not None:
        d["r_col"] = sc.r_col
    d["dynamics"] = {"kind": sc.dynamics.kind, "agents": m, "dt": sc.dynamics.dt,
                     "u_min": list(sc.dynamics.u_min), "u_max": list(sc.dynamics.u_max)}
    d["agents"] = [{"position": list(map(float, s[:2])), "velocity": list(map(float, s[2:]))} for s in x0]
    d["roles"] = dict(sc.geometry.roles)
    d["obstacles"] = [_shape_to_dict(o) for o in sc.geometry.obstacles]
    d["zones"] = [_shape_to_dict(z) for z in sc.geometry.zones]
    d["walls"] = [_shape_to_dict(w) for w in sc.geometry.walls]
    d["predicates"] = [_pred_to_dict(p) for p in sc.predicates.values()]
    d["solver"] = sc.solver
    return d


def scenario_from_dict(d: dict) -> Scenario:
    def need(key, where=""):
        if key not in d:
            raise ScenarioError(f"{where}{key}: missing")
        return d[key]

    dyn = need("dynamics")
    try:
        spec = DynamicsSpec(dyn.get("kind", "double_integrator_2d"), int(dyn.get("agents", 1)),
                            float(dyn.get("dt", 0.1)), tuple(dyn.get("u_min", (-2.0, -2.0))),
                            tuple(dyn.get("u_max", (2.0, 2.0))))
    except ValueError as e:
        raise ScenarioError(f"dynamics: {e}") from None
    agents = need("agents")
    if len(agents) != spec.agents:
        raise ScenarioError(f"agents: expected {spec.agents} entries, got {len(agents)}")
    x0 = []
    for k, a in enumerate(agents):
        pos, vel = a.get("position"), a.get("velocity", [0.0, 0.0])
        if pos is None or len(pos) != 2 or len(vel) != 2:
            raise ScenarioError(f"agents[{k}]: position and velocity must be 2-vectors")
        x0 += list(pos) + list(vel)
    geom = Geometry(
        [_shape_from_dict(o, f"obstacles[{k}]") for k, o in enumerate(d.get("obstacles", []))],
        [_shape_from_dict(z, f"zones[{k}]") for k, z in enumerate(d.get("zones", []))],
        [_shape_from_dict(w, f"walls[{k}]") for k, w in enumerate(d.get("walls", []))],
        dict(d.get("roles", {})),
    )
    preds = {}
    for k, p in enumerate(d.get("predicates", [])):
        fields = {key: (tuple(v) if isinstance(v, list) else v) for key, v in p.items()}
        try:
            pd = PredicateDef(**fields)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"predicates[{k}]: {e}") from None
        preds[pd.name] = pd
    try:
        formula = parse_formula(need("formula"))
    except ValueError as e:
        raise ScenarioError(f"formula: {e}") from None
    return Scenario(
        name=need("name"), task=d.get("task", "custom"), dynamics=spec, x0=tuple(x0),
        horizon=int(need("horizon")), predicates=preds, formula_text=d["formula"],
        geometry=geom, delta=d.get("delta"), r_col=d.get("r_col"), beta=float(d.get("beta", 10.0)),
        gate=d.get("gate", "prose"), solver=dict(d.get("solver", {})), formula=formula,
    )


def dumps_scenario(sc: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(sc))


def loads_scenario(text: str) -> Scenario:
    try:
        d = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ScenarioError(f"config parse error: {e}") from None
    return scenario_from_dict(d)


def load_scenario(path) -> Scenario:
    return loads_scenario(Path(path).read_text())


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc))


def builtin_path(name: str):
    if name not in BUILTINS:
        raise ScenarioError(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTINS)}")
    return resources.files("stlstein") / "data" / f"{name}.toml"


def builtin(name: str) -> Scenario:
    return loads_scenario(builtin_path(name).read_text())


def witness_states(name: str) -> np.ndarray:
    """Committed known-satisfying trajectory for a built-in."""
    path = resources.files("stlstein") / "data" / f"{name}_witness.csv"
    from .traces import read_trace_csv
    return read_trace_csv(io.StringIO(path.read_text()))


def resolve(name_or_path) -> Scenario:
    if str(name_or_path) in BUILTINS:
        return builtin(str(name_or_path))
    return load_scenario(name_or_path)


# ------------------------------------------------------------ checks

def top_conjuncts(f):
    return f.children if isinstance(f, And) else (f,)


def check_trajectory(sc: Scenario, states):
    """Hard robustness of the whole formula and of each top-level conjunct."""
    states = np.asarray(states, dtype=float)
    if states.shape != (sc.horizon + 1, sc.dynamics.n):
        raise ScenarioError(
            f"trace shape {states.shape} does not match ({sc.horizon + 1}, {sc.dynamics.n})")
    total = float(hard_batch(sc.formula, states, sc.predicates)[0])
    parts = {pretty_print(c): float(hard_batch(c, states, sc.predicates)[0])
             for c in top_conjuncts(sc.formula)}
    return total, parts


def audit(sc: Scenario) -> list[str]:
    """Geometry/formula agreement: each obstacle guarded once per agent,
    each goal zone reached exactly once."""
    issues = []

    def hits(name, prefix):
        return sum(1 for c in top_conjuncts(sc.formula)
                   if pretty_print(c).startswith(prefix) and name in _pred_names(c))

    for o in sc.geometry.obstacles:
        for i in range(sc.agents):
            n = hits(f"avoid_a{i}_{o.name}", "G[")
            if n != 1:
                issues.append(f"obstacle {o.name} appears in {n} avoid conjuncts for agent {i}")
    for w in sc.geometry.walls:
        for i in range(sc.agents):
            n = hits(f"in_a{i}_{w.name}", "G[")
            if n != 1:
                issues.append(f"wall {w.name} appears in {n} avoid conjuncts for agent {i}")
    goal_zones = _goal_zones(sc)
    for zname, agent in goal_zones:
        n = sum(1 for c in top_conjuncts(sc.formula)
                if pretty_print(c).startswith("F[") and f"in_a{agent}_{zname}" in _pred_names(c))
        if n != 1:
            issues.append(f"zone {zname} (agent {agent}) appears in {n} reach conjuncts")
    return issues


def _pred_names(f):
    return predicate_names(f)


def _goal_zones(sc):
    g = sc.geometry
    if sc.task == "reach_avoid":
        return [(z.name, 0) for z in g.zones]
    if sc.task == "long_horizon":
        return [(z.name, i) for z in g.zones for i in range(sc.agents)]
    if sc.task == "button_order":
        return [(g.roles.get("A", "A"), 0), (g.roles.get("C", "C"), 1)]
    if sc.task == "sync_goals":
        goals = g.roles.get("goals") or [z.name for z in g.zones[:sc.agents]]
        return [(goals[i], i) for i in range(sc.agents)]
    if sc.task == "corridor":
        return [(g.roles.get("corridor", "corridor"), i) for i in range(sc.agents)]
    return []
