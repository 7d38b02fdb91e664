"""Comparison optimizers on the same rollout/semantics stack.

* MPPI with handcrafted distance costs (reach-avoid style tasks only);
* single-sequence gradient ascent on smooth robustness;
* SVGD driven by central finite differences of hard robustness.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .objective import StlObjective
from .optimizer import RunResult, SvpioConfig, sample_uniform, transport
from .scenarios import Box, ScenarioError


@dataclass
class MppiConfig:
    samples: int = 10
    iterations: int = 200
    temperature: float = 1.0
    sigma: float | tuple = 0.5  # std of exploration noise per control dim
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not np.all(np.asarray(self.sigma) > 0):
            raise ValueError("noise std must be positive")


@dataclass
class HeuristicCost:
    obstacle: float = 10.0
    goal: float = 0.1
    terminal: float = 1.0

    def __post_init__(self):
        if min(self.obstacle, self.goal, self.terminal) < 0:
            raise ValueError("cost weights must be non-negative")


@dataclass
class FdConfig:
    delta: float = 1e-4

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("finite-difference step must be positive")


def _goal_center(scenario):
    g = scenario.geometry
    if scenario.task != "reach_avoid" or len(g.zones) != 1:
        raise ScenarioError(
            f"{scenario.name}: heuristic costs need a single-agent task with one goal zone")
    return np.asarray(g.zones[0].center)


def heuristic_cost(scenario, states, cost: HeuristicCost):
    """Distance-based trajectory cost for states (K, H+1, n) -> (K,)."""
    goal = _goal_center(scenario)
    pos = states[..., :2]
    J = np.zeros(states.shape[0])
    for o in scenario.geometry.obstacles:
        pen = np.maximum(0.0, o.radius - np.linalg.norm(pos - np.asarray(o.center), axis=-1))
        J += cost.obstacle * pen.sum(axis=-1)
    dist = np.linalg.norm(pos - goal, axis=-1)
    J += cost.goal * dist.sum(axis=-1) + cost.terminal * dist[:, -1]
    return J


def mppi_weights(costs, temperature):
    """Normalized importance weights w_k ∝ exp(-J_k / temperature)."""
    z = -(costs - costs.min()) / temperature
    w = np.exp(z)
    return w / w.sum()


def run_mppi(scenario, cfg: MppiConfig, cost: HeuristicCost = HeuristicCost()) -> RunResult:
    t0 = time.perf_counter()
    _goal_center(scenario)
    obj = StlObjective(scenario)
    rng = np.random.default_rng(cfg.seed)
    lower, upper = obj.lower, obj.upper
    U = np.zeros(obj.shape)
    sigma = np.broadcast_to(np.asarray(cfg.sigma, dtype=float), (obj.shape[1],))
    times, weight_err = [], 0.0
    for _ in range(cfg.iterations):
        t1 = time.perf_counter()
        noise = rng.standard_normal((cfg.samples, *obj.shape)) * sigma
        V = np.clip(U + noise, lower, upper)
        J = heuristic_cost(scenario, obj.rollout(V), cost)
        w = mppi_weights(J, cfg.temperature)
        weight_err = max(weight_err, abs(w.sum() - 1.0))
        U = U + np.tensordot(w, V - U, axes=1)
        times.append(1e3 * (time.perf_counter() - t1))
    rho = float(obj.hard(U[None])[0])
    return RunResult(
        scenario=scenario.name, method="mppi", seed=cfg.seed, controls=U, states=obj.rollout(U),
        robustness=rho, wall_time_s=time.perf_counter() - t0, iteration_ms=times,
        evaluations=cfg.samples * cfg.iterations + 1,
        config={**asdict(cfg), **{f"cost_{k}": v for k, v in asdict(cost).items()},
                "max_weight_sum_error": weight_err},
    )


def run_gradient_ascent(scenario, iterations: int, step_size, seed: int, lam: float = 1.0,
                        beta: float | None = None) -> RunResult:
    """Plain projected ascent: u <- clip(u + step * grad / lam).

    With ``step_size = eps`` and matching ``lam`` this is the N=1 case of
    :func:`stlstein.optimizer.run_svpio`, iterate for iterate.
    """
    t0 = time.perf_counter()
    obj = StlObjective(scenario, beta)
    rng = np.random.default_rng(seed)
    lower, upper = obj.lower, obj.upper
    U = sample_uniform(rng, 1, obj.shape, lower, upper)
    step = np.asarray(step_size, dtype=float)
    times = []
    for _ in range(iterations):
        t1 = time.perf_counter()
        _, g = obj.value_and_grad(U)
        U = np.clip(U + step * (g / lam), lower, upper)
        times.append(1e3 * (time.perf_counter() - t1))
    rho = float(obj.hard(U)[0])
    return RunResult(
        scenario=scenario.name, method="gd", seed=seed, controls=U[0], states=obj.rollout(U[0]),
        robustness=rho, wall_time_s=time.perf_counter() - t0, iteration_ms=times,
        evaluations=obj.evaluations,
        config={"iterations": iterations, "step_size": _plain(step_size), "lam": lam,
                "beta": obj.smoothing.beta},
    )


def _plain(v):
    return np.asarray(v).tolist()


def fd_gradient(objective, U, delta: float, chunk: int = 4096):
    """Central differences of hard robustness w.r.t. every control coordinate.

    ``U`` has shape (N, H, nu); returns an array of the same shape.
    """
    if not delta > 0:
        raise ValueError("finite-difference step must be positive")
    U = np.asarray(U, dtype=float)
    N = len(U)
    D = int(np.prod(U.shape[1:]))
    flat = U.reshape(N, D)
    out = np.empty((N, D))
    eye = np.eye(D) * delta
    for i in range(N):
        plus = flat[i] + eye
        minus = flat[i] - eye
        both = np.concatenate([plus, minus]).reshape(2 * D, *U.shape[1:])
        vals = np.concatenate([objective.hard(both[k:k + chunk]) for k in range(0, 2 * D, chunk)])
        out[i] = (vals[:D] - vals[D:]) / (2 * delta)
    return out.reshape(U.shape)


def run_fd_svgd(scenario, cfg: SvpioConfig, fd: FdConfig = FdConfig()) -> RunResult:
    t0 = time.perf_counter()
    obj = StlObjective(scenario)
    U, hard, diags, times = transport(obj, cfg, grad_fn=lambda U: fd_gradient(obj, U, fd.delta))
    best = int(np.argmax(hard))
    return RunResult(
        scenario=scenario.name, method="fd-svgd", seed=cfg.seed, controls=U[best],
        states=obj.rollout(U[best]), robustness=float(hard[best]), diagnostics=diags,
        wall_time_s=time.perf_counter() - t0, iteration_ms=times, evaluations=obj.evaluations,
        config={**asdict(cfg), "fd_delta": fd.delta},
    )
