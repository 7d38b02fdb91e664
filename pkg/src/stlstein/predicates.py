"""Parametric predicate library with analytic margins and gradients.

Joint state layout: agent ``i`` occupies ``x[4i:4i+4] = (px, py, vx, vy)``.
All evaluators take ``x`` of shape ``(..., n)`` and return margins of shape
``(...)`` plus gradients of shape ``(..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("circle_avoid", "circle_in", "box_in", "halfspace_x_ge", "pairwise_separation", "custom_affine")

# below this norm the radial direction is undefined; use +x instead
NORM_EPS = 1e-9


@dataclass(frozen=True)
class PredicateDef:
    name: str
    kind: str
    agents: tuple = (0,)
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    half_extents: tuple = (0.0, 0.0)
    threshold: float = 0.0
    r_col: float = 0.0
    # custom_affine: margin = a . x + b over the full joint state
    a: tuple = field(default=())
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(int(i) for i in self.agents))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_extents", tuple(float(h) for h in self.half_extents))
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: unknown predicate kind {self.kind!r}")
        if self.kind in ("circle_avoid", "circle_in") and not self.radius > 0:
            raise ValueError(f"{self.name}: radius must be positive")
        if self.kind == "box_in" and not all(h > 0 for h in self.half_extents):
            raise ValueError(f"{self.name}: half extents must be positive")
        if self.kind == "pairwise_separation":
            if len(self.agents) != 2:
                raise ValueError(f"{self.name}: pairwise_separation needs two agents")
            if not self.r_col > 0:
                raise ValueError(f"{self.name}: r_col must be positive")
        if any(i < 0 for i in self.agents):
            raise ValueError(f"{self.name}: negative agent index")

    def state_dim_needed(self) -> int:
        if self.kind == "custom_affine":
            return len(self.a)
        return 4 * (max(self.agents) + 1)


def _pos(x, i):
    return x[..., 4 * i:4 * i + 2]


def _radial(d):
    """Euclidean norm of d over the last axis and its unit direction."""
    r = np.linalg.norm(d, axis=-1)
    unit = np.zeros_like(d)
    ok = r >= NORM_EPS
    np.divide(d, r[..., None], out=unit, where=ok[..., None])
    unit[~ok] = np.array([1.0, 0.0])
    return r, unit


def _softmin2(u, v, beta):
    """Two-way LogSumExp softmin and the weight on ``u``."""
    m = np.minimum(u, v)
    eu = np.exp(-beta * (u - m))
    ev = np.exp(-beta * (v - m))
    s = eu + ev
    return m - np.log(s) / beta, eu / s


def predicate_margin(p: PredicateDef, x) -> np.ndarray:
    """Hard margin only; avoids building gradient arrays."""
    x = np.asarray(x, dtype=float)
    if p.state_dim_needed() > x.shape[-1]:
        raise ValueError(f"{p.name}: state dimension {x.shape[-1]} too small (needs {p.state_dim_needed()})")
    kind = p.kind
    if kind in ("circle_avoid", "circle_in"):
        i = p.agents[0]
        r = np.hypot(x[..., 4 * i] - p.center[0], x[..., 4 * i + 1] - p.center[1])
        return r - p.radius if kind == "circle_avoid" else p.radius - r
    if kind == "box_in":
        i = p.agents[0]
        mx = p.half_extents[0] - np.abs(x[..., 4 * i] - p.center[0])
        my = p.half_extents[1] - np.abs(x[..., 4 * i + 1] - p.center[1])
        return np.minimum(mx, my)
    if kind == "halfspace_x_ge":
        return x[..., 4 * p.agents[0]] - p.threshold
    if kind == "pairwise_separation":
        i, j = p.agents
        r = np.hypot(x[..., 4 * i] - x[..., 4 * j], x[..., 4 * i + 1] - x[..., 4 * j + 1])
        return r - 2.0 * p.r_col
    a = np.zeros(x.shape[-1])
    a[:len(p.a)] = p.a
    return x @ a + p.b


def predicate_value_grad(p: PredicateDef, x, beta: float | None = None):
    """Margin g(x) and dg/dx.

    ``beta`` only matters for ``box_in``: None keeps the internal min hard,
    otherwise it is softened with the same LogSumExp sharpness.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if p.state_dim_needed() > n:
        raise ValueError(f"{p.name}: state dimension {n} too small (needs {p.state_dim_needed()})")
    grad = np.zeros_like(x)
    kind = p.kind

    if kind in ("circle_avoid", "circle_in"):
        i = p.agents[0]
        r, unit = _radial(_pos(x, i) - np.array(p.center))
        if kind == "circle_avoid":
            margin = r - p.radius
            grad[..., 4 * i:4 * i + 2] = unit
        else:
            margin = p.radius - r
            grad[..., 4 * i:4 * i + 2] = -unit
        return margin, grad

    if kind == "box_in":
        i = p.agents[0]
        d = _pos(x, i) - np.array(p.center)
        hx, hy = p.half_extents
        mx = hx - np.abs(d[..., 0])
        my = hy - np.abs(d[..., 1])
        gx = -np.sign(d[..., 0])
        gy = -np.sign(d[..., 1])
        if beta is None:
            take_x = mx <= my
            margin = np.where(take_x, mx, my)
            grad[..., 4 * i] = np.where(take_x, gx, 0.0)
            grad[..., 4 * i + 1] = np.where(take_x, 0.0, gy)
        else:
            margin, wx = _softmin2(mx, my, beta)
            grad[..., 4 * i] = wx * gx
            grad[..., 4 * i + 1] = (1.0 - wx) * gy
        return margin, grad

    if kind == "halfspace_x_ge":
        i = p.agents[0]
        margin = x[..., 4 * i] - p.threshold
        grad[..., 4 * i] = 1.0
        return margin, grad

    if kind == "pairwise_separation":
        i, j = p.agents
        r, unit = _radial(_pos(x, i) - _pos(x, j))
        margin = r - 2.0 * p.r_col
        grad[..., 4 * i:4 * i + 2] += unit
        grad[..., 4 * j:4 * j + 2] -= unit
        return margin, grad

    # custom_affine
    a = np.zeros(n)
    a[:len(p.a)] = p.a
    margin = x @ a + p.b
    grad[...] = a
    return margin, grad
