"""Robustness of control sequences: rollout -> STL semantics -> adjoint."""

from __future__ import annotations

import numpy as np

from .dynamics import backprop_controls, rollout, rollout_jacobians
from .semantics import SmoothingConfig, hard_batch, smooth_batch


class StlObjective:
    """Maps particle controls (N, H, nu) to hard robustness and smooth gradients.

    Anything exposing ``lower``, ``upper``, ``shape``, ``hard`` and
    ``value_and_grad`` can stand in for it in the optimizers.
    """

    def __init__(self, scenario, beta: float | None = None):
        self.scenario = scenario
        self.spec = scenario.dynamics
        self.x0 = np.asarray(scenario.x0, dtype=float)
        self.H = scenario.horizon
        self.formula = scenario.formula
        self.bindings = scenario.predicates
        self.smoothing = SmoothingConfig(beta if beta is not None else scenario.beta)
        self.jac = rollout_jacobians(self.spec, self.H)
        self.evaluations = 0

    @property
    def shape(self):
        return (self.H, self.spec.nu)

    @property
    def lower(self):
        return self.spec.lower

    @property
    def upper(self):
        return self.spec.upper

    def rollout(self, U):
        return rollout(self.spec, self.x0, U)

    def hard(self, U):
        U = np.asarray(U)
        self.evaluations += int(np.prod(U.shape[:-2]))
        return hard_batch(self.formula, self.rollout(U), self.bindings)

    def value_and_grad(self, U):
        """Smooth robustness (N,) and d rho / d u (N, H, nu)."""
        U = np.asarray(U)
        self.evaluations += len(U)
        states = self.rollout(U)
        val, gx = smooth_batch(self.formula, states, self.bindings, self.smoothing)
        return val, backprop_controls(self.jac, gx)
