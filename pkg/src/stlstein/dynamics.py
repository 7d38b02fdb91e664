"""Planar double-integrator dynamics, rollouts and the adjoint pass.

Each agent has state (px, py, vx, vy) and acceleration input (ax, ay),
integrated with semi-implicit Euler:

    v[t+1] = v[t] + a[t] dt
    p[t+1] = p[t] + v[t+1] dt
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("double_integrator_2d", "multi_agent_double_integrator")


@dataclass(frozen=True)
class DynamicsSpec:
    kind: str = "double_integrator_2d"
    agents: int = 1
    dt: float = 0.1
    u_min: tuple = (-2.0, -2.0)
    u_max: tuple = (2.0, 2.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        if self.agents < 1:
            raise ValueError("need at least one agent")
        if self.kind == "double_integrator_2d" and self.agents != 1:
            raise ValueError("double_integrator_2d is single-agent")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        # bounds may be given per agent (2 values) or per joint control (2m values)
        lo = _broadcast_bounds(self.u_min, self.agents)
        hi = _broadcast_bounds(self.u_max, self.agents)
        if not np.all(lo < hi):
            raise ValueError("u_min must be strictly below u_max")
        object.__setattr__(self, "u_min", tuple(lo))
        object.__setattr__(self, "u_max", tuple(hi))

    @property
    def n(self) -> int:
        return 4 * self.agents

    @property
    def nu(self) -> int:
        return 2 * self.agents

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.u_min)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.u_max)


def _broadcast_bounds(b, m):
    b = [float(v) for v in b]
    if len(b) == 2:
        b = b * m
    if len(b) != 2 * m:
        raise ValueError(f"control bounds need 2 or {2 * m} entries, got {len(b)}")
    return b


@dataclass(frozen=True)
class RolloutJacobians:
    A: np.ndarray  # (H, n, n)
    B: np.ndarray  # (H, n, nu)


def clip_controls(spec: DynamicsSpec, u):
    return np.clip(u, spec.lower, spec.upper)


def rollout(spec: DynamicsSpec, x0, u) -> np.ndarray:
    """Integrate controls ``u`` of shape (..., H, 2m) from ``x0`` (n,).

    Returns states of shape (..., H+1, 4m).
    """
    u = np.asarray(u, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.n,):
        raise ValueError(f"x0 must have shape ({spec.n},), got {x0.shape}")
    if u.shape[-1] != spec.nu:
        raise ValueError(f"controls must have {spec.nu} components, got {u.shape[-1]}")
    H = u.shape[-2]
    dt = spec.dt
    m = spec.agents
    batch = u.shape[:-2]
    # work coordinate-major so each state component is one contiguous block;
    # this keeps the per-predicate column reads cheap for large batches
    acc = np.ascontiguousarray(np.moveaxis(u, -1, 0)).reshape(m, 2, *batch, H)
    s0 = x0.reshape(m, 4)
    lead = (m, 2) + (1,) * len(batch)
    x = np.empty((m, 4, *batch, H + 1))
    x[:, :2, ..., 0] = s0[:, :2].reshape(lead)
    x[:, 2:, ..., 0] = s0[:, 2:].reshape(lead)
    # v[t+1] = v[t] + a[t] dt ; p[t+1] = p[t] + v[t+1] dt, as running sums
    v = np.cumsum(acc * dt, axis=-1)
    v += s0[:, 2:].reshape(lead + (1,))
    x[:, 2:, ..., 1:] = v
    p = np.cumsum(v * dt, axis=-1)
    p += s0[:, :2].reshape(lead + (1,))
    x[:, :2, ..., 1:] = p
    # non-finite values propagate through the running sums to the last step
    if not np.all(np.isfinite(x[..., -1])):
        raise FloatingPointError("rollout produced non-finite states")
    return np.moveaxis(x.reshape(spec.n, *batch, H + 1), 0, -1)


def step_jacobians(spec: DynamicsSpec):
    """Constant per-step A = df/dx and B = df/du for the double integrator."""
    dt = spec.dt
    I2 = np.eye(2)
    A1 = np.block([[I2, dt * I2], [np.zeros((2, 2)), I2]])
    B1 = np.vstack([dt * dt * I2, dt * I2])
    m = spec.agents
    A = np.kron(np.eye(m), A1)
    B = np.kron(np.eye(m), B1)
    return A, B


def rollout_jacobians(spec: DynamicsSpec, horizon: int) -> RolloutJacobians:
    A, B = step_jacobians(spec)
    return RolloutJacobians(np.broadcast_to(A, (horizon, *A.shape)),
                            np.broadcast_to(B, (horizon, *B.shape)))


def backprop_controls(jac: RolloutJacobians, per_state_grad) -> np.ndarray:
    """Adjoint recursion mapping dρ/dx[0:H+1] to dρ/du[0:H].

    ``per_state_grad`` may carry leading batch axes: (..., H+1, n) -> (..., H, nu).
    """
    g = np.asarray(per_state_grad, dtype=float)
    H = g.shape[-2] - 1
    if jac.A.shape[0] != H:
        raise ValueError(f"jacobians cover {jac.A.shape[0]} steps, gradient has {H}")
    nu = jac.B.shape[-1]
    gu = np.empty((*g.shape[:-2], H, nu))
    lam = g[..., H, :]
    for t in range(H - 1, -1, -1):
        gu[..., t, :] = lam @ jac.B[t]
        lam = g[..., t, :] + lam @ jac.A[t]
    return gu
