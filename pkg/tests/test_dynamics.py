import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stlstein.dynamics import (DynamicsSpec, backprop_controls, clip_controls, rollout, rollout_jacobians,
                               step_jacobians)
from stlstein.predicates import PredicateDef
from stlstein.semantics import SmoothingConfig, robustness_smooth
from stlstein.stl import parse_formula


def _loop_rollout(spec, x0, u):
    """Step-by-step semi-implicit Euler, written out per agent."""
    x = [np.array(x0, dtype=float)]
    for a in u:
        s = x[-1].copy()
        for i in range(spec.agents):
            v = s[4 * i + 2:4 * i + 4] + a[2 * i:2 * i + 2] * spec.dt
            s[4 * i:4 * i + 2] = s[4 * i:4 * i + 2] + v * spec.dt
            s[4 * i + 2:4 * i + 4] = v
        x.append(s)
    return np.array(x)


def test_constant_velocity():
    spec = DynamicsSpec(dt=0.1)
    x = rollout(spec, [0, 0, 1, 0], np.zeros((10, 2)))
    assert abs(x[-1, 0] - 1.0) <= 1e-12
    np.testing.assert_array_equal(x[:, 2], 1.0)


def test_matches_stepwise_integration():
    rng = np.random.default_rng(0)
    spec = DynamicsSpec("multi_agent_double_integrator", 3, dt=0.05)
    x0 = rng.normal(size=12)
    u = rng.uniform(-2, 2, size=(25, 6))
    np.testing.assert_allclose(rollout(spec, x0, u), _loop_rollout(spec, x0, u), atol=1e-12)


def test_batched_rollout():
    rng = np.random.default_rng(1)
    spec = DynamicsSpec("multi_agent_double_integrator", 2)
    U = rng.normal(size=(4, 3, 7, 4))
    X = rollout(spec, np.zeros(8), U)
    assert X.shape == (4, 3, 8, 8)
    np.testing.assert_allclose(X[2, 1], rollout(spec, np.zeros(8), U[2, 1]), atol=1e-14)


def test_step_jacobians():
    spec = DynamicsSpec(dt=0.2)
    A, B = step_jacobians(spec)
    x0 = np.array([0.3, -0.1, 0.5, 0.2])
    u = np.array([[1.0, -2.0]])
    np.testing.assert_allclose(rollout(spec, x0, u)[1], A @ x0 + B @ u[0], atol=1e-15)


def test_bounds_broadcast_and_validate():
    spec = DynamicsSpec("multi_agent_double_integrator", 2, u_min=(-1, -2), u_max=(1, 2))
    np.testing.assert_array_equal(spec.lower, [-1, -2, -1, -2])
    with pytest.raises(ValueError):
        DynamicsSpec(u_min=(1, 1), u_max=(0, 2))
    with pytest.raises(ValueError):
        DynamicsSpec(u_min=(0, 0, 0), u_max=(1, 1, 1))
    with pytest.raises(ValueError):
        DynamicsSpec("double_integrator_2d", 2)
    with pytest.raises(ValueError):
        DynamicsSpec(dt=0)
    np.testing.assert_array_equal(clip_controls(spec, np.array([5.0, -5, 0, 3])), [1, -2, 0, 2])


def test_shape_errors():
    spec = DynamicsSpec()
    with pytest.raises(ValueError):
        rollout(spec, np.zeros(3), np.zeros((5, 2)))
    with pytest.raises(ValueError):
        rollout(spec, np.zeros(4), np.zeros((5, 3)))


def test_non_finite_controls_rejected():
    u = np.zeros((5, 2))
    u[2, 1] = np.inf
    with pytest.raises(FloatingPointError):
        rollout(DynamicsSpec(), np.zeros(4), u)


def test_backprop_zero():
    jac = rollout_jacobians(DynamicsSpec(), 6)
    np.testing.assert_array_equal(backprop_controls(jac, np.zeros((7, 4))), np.zeros((6, 2)))


def test_backprop_locality():
    spec = DynamicsSpec(dt=0.1)
    jac = rollout_jacobians(spec, 5)
    g = np.zeros((6, 4))
    g[1] = [1.0, 2.0, 3.0, 4.0]
    gu = backprop_controls(jac, g)
    np.testing.assert_allclose(gu[0], jac.B[0].T @ g[1])
    np.testing.assert_array_equal(gu[1:], 0.0)


def test_backprop_horizon_mismatch():
    jac = rollout_jacobians(DynamicsSpec(), 5)
    with pytest.raises(ValueError):
        backprop_controls(jac, np.zeros((8, 4)))


def test_end_to_end_gradient():
    rng = np.random.default_rng(4)
    spec = DynamicsSpec(dt=0.1)
    preds = {"obs": PredicateDef("obs", "circle_avoid", (0,), (0.3, 0.1), radius=0.2),
             "goal": PredicateDef("goal", "box_in", (0,), (0.5, 0.5), half_extents=(0.2, 0.2))}
    f = parse_formula("G[0,5] obs and F[0,5] goal")
    x0 = np.array([0.0, 0.0, 1.0, 0.5])
    u = rng.normal(size=(5, 2))
    cfg = SmoothingConfig(10.0)

    def value(u):
        return robustness_smooth(f, rollout(spec, x0, u), preds, cfg).value

    r = robustness_smooth(f, rollout(spec, x0, u), preds, cfg)
    gu = backprop_controls(rollout_jacobians(spec, 5), r.per_state_grad)
    fd = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        d = np.zeros_like(u)
        d[idx] = 1e-5
        fd[idx] = (value(u + d) - value(u - d)) / 2e-5
    assert np.abs(gu - fd).max() / np.abs(fd).max() <= 1e-4


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 12), st.integers(0, 2**31))
def test_rollout_linearity(m, H, seed):
    rng = np.random.default_rng(seed)
    spec = DynamicsSpec("multi_agent_double_integrator", m)
    x0 = rng.normal(size=4 * m)
    u = rng.normal(size=(H, 2 * m))
    du = rng.normal(size=(H, 2 * m))
    jac = rollout_jacobians(spec, H)
    # propagate du through the per-step Jacobians
    dx = [np.zeros(4 * m)]
    for t in range(H):
        dx.append(jac.A[t] @ dx[-1] + jac.B[t] @ du[t])
    np.testing.assert_allclose(rollout(spec, x0, u + du) - rollout(spec, x0, u), np.array(dx), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(1, 10), st.integers(0, 2**31))
def test_agents_decoupled(m, H, seed):
    rng = np.random.default_rng(seed)
    spec = DynamicsSpec("multi_agent_double_integrator", m)
    x0 = rng.normal(size=4 * m)
    u = rng.normal(size=(H, 2 * m))
    i = int(rng.integers(m))
    v = u.copy()
    v[:, 2 * i:2 * i + 2] += rng.normal(size=(H, 2))
    a, b = rollout(spec, x0, u), rollout(spec, x0, v)
    for j in range(m):
        if j != i:
            np.testing.assert_array_equal(a[:, 4 * j:4 * j + 4], b[:, 4 * j:4 * j + 4])
