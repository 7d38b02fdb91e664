"""Stein variational transport of control-sequence particles toward high robustness.

The target density over controls is exp(rho(u) / lam) restricted to the
control box. One update moves every particle along

    phi(u_i) = 1/N sum_j [ K(u_j, u_i) grad rho(u_j) / lam + grad_{u_j} K(u_j, u_i) ]

and clamps it back into the box.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform


@dataclass
class SvpioConfig:
    particles: int = 10
    iterations: int = 20
    epsilon: float | tuple | None = None  # None -> 0.05 * (u_max - u_min)
    lam: float = 0.1
    seed: int = 0
    bandwidth_floor: float = 1e-6
    clamp_after_step: bool = True

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("need at least one particle")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.bandwidth_floor > 0:
            raise ValueError("bandwidth_floor must be positive")
        if self.epsilon is not None and not np.all(np.asarray(self.epsilon) > 0):
            raise ValueError("epsilon must be positive")

    def step_size(self, lower, upper):
        if self.epsilon is None:
            return 0.05 * (np.asarray(upper) - np.asarray(lower))
        return np.asarray(self.epsilon, dtype=float)


@dataclass
class IterationDiag:
    iteration: int
    best: float
    mean: float
    worst: float
    mean_pairwise_distance: float
    bandwidth: float


@dataclass
class Population:
    particles: np.ndarray  # (N, H, nu)
    hard: np.ndarray | None = None
    smooth: np.ndarray | None = None
    grads: np.ndarray | None = None


@dataclass
class RunResult:
    scenario: str
    method: str
    seed: int
    controls: np.ndarray
    states: np.ndarray
    robustness: float
    diagnostics: list = field(default_factory=list)
    wall_time_s: float = 0.0
    iteration_ms: list = field(default_factory=list)
    evaluations: int = 0
    config: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.robustness > 0

    def to_json(self) -> dict:
        """Deterministic payload plus a separate ``timing`` section."""
        return {
            "scenario": self.scenario,
            "method": self.method,
            "seed": self.seed,
            "robustness": float(self.robustness),
            "satisfied": bool(self.satisfied),
            "evaluations": int(self.evaluations),
            "config": _jsonable(self.config),
            "diagnostics": [asdict(d) for d in self.diagnostics],
            "controls": self.controls.tolist(),
            "timing": {"wall_time_s": self.wall_time_s, "iteration_ms": list(self.iteration_ms)},
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def rbf_kernel(U, bandwidth_floor: float = 1e-6, bandwidth: float | None = None):
    """RBF kernel over flattened particles with the median heuristic.

    Returns ``K`` (N, N), ``gradK`` (N, N, D) with gradK[j, i] = d K(u_j, u_i) / d u_j,
    and the bandwidth ``h``.
    """
    X = np.asarray(U, dtype=float).reshape(len(U), -1)
    N = len(X)
    if N == 1:
        h = bandwidth if bandwidth is not None else bandwidth_floor
        return np.ones((1, 1)), np.zeros((1, 1, X.shape[1])), h
    if bandwidth is None:
        med = np.median(pdist(X))
        h = max(med ** 2, bandwidth_floor) / np.log(N)
    else:
        h = bandwidth
    sq = squareform(pdist(X, "sqeuclidean"))
    K = np.exp(-sq / h)
    diff = X[:, None, :] - X[None, :, :]  # u_j - u_i at [j, i]
    gradK = -2.0 / h * diff * K[..., None]
    return K, gradK, h


def svgd_direction(U, grads, lam: float, bandwidth_floor: float = 1e-6):
    """Stein direction phi (N, *shape) for robustness gradients ``grads``."""
    N = len(U)
    X = U.reshape(N, -1)
    G = grads.reshape(N, -1)
    if N == 1:
        # K = 1 and the kernel gradient vanishes
        return (G / lam).reshape(U.shape), bandwidth_floor
    K, _, h = rbf_kernel(X, bandwidth_floor)
    # sum_j grad_{u_j} K(u_j, u_i) = -2/h * (sum_j K_ji u_j - u_i sum_j K_ji)
    repulse = -2.0 / h * (K.T @ X - X * K.sum(axis=0)[:, None])
    phi = (K.T @ (G / lam) + repulse) / N
    return phi.reshape(U.shape), h


def svgd_step(pop: Population, cfg: SvpioConfig, lower, upper):
    """One transport step; returns the moved particles and the bandwidth used."""
    U = pop.particles
    phi, h = svgd_direction(U, pop.grads, cfg.lam, cfg.bandwidth_floor)
    if not np.all(np.isfinite(phi)):
        bad = np.unique(np.nonzero(~np.isfinite(phi.reshape(len(U), -1)))[0])
        raise FloatingPointError(f"non-finite SVGD update for particles {bad.tolist()}")
    new = U + cfg.step_size(lower, upper) * phi
    if cfg.clamp_after_step:
        new = np.clip(new, lower, upper)
    return new, h


def mean_pairwise_distance(U) -> float:
    X = np.asarray(U).reshape(len(U), -1)
    return float(pdist(X).mean()) if len(X) > 1 else 0.0


def sample_uniform(rng, n, shape, lower, upper):
    return rng.uniform(lower, upper, size=(n, *shape))


def transport(objective, cfg: SvpioConfig, U0=None, grad_fn=None):
    """Run the SVGD loop on any objective; returns (final particles, hard values, diags, ms)."""
    lower, upper = objective.lower, objective.upper
    if U0 is None:
        rng = np.random.default_rng(cfg.seed)
        U0 = sample_uniform(rng, cfg.particles, objective.shape, lower, upper)
    grad_fn = grad_fn or (lambda U: objective.value_and_grad(U)[1])
    U = np.array(U0, dtype=float)
    diags, times = [], []
    for it in range(cfg.iterations):
        t0 = time.perf_counter()
        hard = objective.hard(U)
        pop = Population(U, hard=hard, grads=grad_fn(U))
        dist = mean_pairwise_distance(U)
        U, h = svgd_step(pop, cfg, lower, upper)
        diags.append(IterationDiag(it, float(hard.max()), float(hard.mean()), float(hard.min()), dist, float(h)))
        times.append(1e3 * (time.perf_counter() - t0))
    return U, objective.hard(U), diags, times


def run_svpio(scenario, cfg: SvpioConfig, beta: float | None = None) -> RunResult:
    from .objective import StlObjective

    t0 = time.perf_counter()
    obj = StlObjective(scenario, beta)
    U, hard, diags, times = transport(obj, cfg)
    best = int(np.argmax(hard))  # first index wins ties
    return RunResult(
        scenario=scenario.name, method="svpio", seed=cfg.seed,
        controls=U[best], states=obj.rollout(U[best]), robustness=float(hard[best]),
        diagnostics=diags, wall_time_s=time.perf_counter() - t0, iteration_ms=times,
        evaluations=obj.evaluations,
        config={**asdict(cfg), "beta": obj.smoothing.beta},
    )
