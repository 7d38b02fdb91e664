"""Quantitative STL semantics over discrete traces.

Two evaluators share one recursion:

* hard: exact min/max robustness;
* smooth: LogSumExp softmin/softmax with sharpness ``beta`` plus an exact
  reverse-mode gradient with respect to every state of the trace.

Each formula node is evaluated as a *signal* over the contiguous block of
start times its parent needs, batched over a leading particle axis. Smooth
nodes hand back a closure that pushes an output adjoint down to their
children, so the backward pass mirrors the evaluation tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .predicates import predicate_margin, predicate_value_grad
from .stl import (Always, And, Eventually, Formula, Implies, Not, Or, Pred,
                  TrueF, Until, pretty_print)

DEFAULT_BETA = 10.0
TOP_SENTINEL = 1e6


@dataclass(frozen=True)
class SmoothingConfig:
    beta: float = DEFAULT_BETA
    top_sentinel: float = TOP_SENTINEL

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass
class Trace:
    states: np.ndarray  # (H+1, n)
    dt: float = 0.1

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or len(self.states) < 1:
            raise ValueError("trace states must be a non-empty (H+1, n) array")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trace contains non-finite states")

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    @property
    def n(self) -> int:
        return self.states.shape[1]


@dataclass
class RobustnessResult:
    value: float
    per_state_grad: np.ndarray | None = None


class EmptyWindowError(ValueError):
    pass


class NonFiniteRobustness(FloatingPointError):
    pass


# ------------------------------------------------------------ LSE reductions

def _lse_max(v, beta):
    """Softmax over the last axis and its weights; -inf entries are ignored."""
    m = np.max(v, axis=-1, keepdims=True)
    e = np.exp(beta * (v - m))
    s = e.sum(axis=-1, keepdims=True)
    return (m + np.log(s) / beta)[..., 0], e / s


def softmax(v, beta: float) -> float:
    return float(_lse_max(np.asarray(v, dtype=float), beta)[0])


def softmin(v, beta: float) -> float:
    return -softmax(-np.asarray(v, dtype=float), beta)


def _reduce(v, beta, use_max):
    """Hard or smooth max/min over the last axis; returns (value, weights|None)."""
    if beta is None:
        return (v.max(axis=-1) if use_max else v.min(axis=-1)), None
    if use_max:
        return _lse_max(v, beta)
    val, w = _lse_max(-v, beta)
    return -val, w


# ------------------------------------------------------------ evaluator

class _Evaluator:
    def __init__(self, states, bindings, beta, top_sentinel):
        self.states = states  # (B, H+1, n)
        self.H = states.shape[1] - 1
        self.bindings = bindings
        self.beta = beta
        self.top = top_sentinel
        self.smooth = beta is not None
        self.grad = np.zeros_like(states) if self.smooth else None
        self._pred_cache = {}

    # Each _eval returns (values (B, T), backward | None) for times lo..hi.
    def eval(self, f: Formula, lo: int, hi: int):
        val, back = self._dispatch(f, lo, hi)
        if self.smooth and not np.all(np.isfinite(val)):
            raise NonFiniteRobustness(f"non-finite robustness in subformula {pretty_print(f)}")
        return val, back

    def _dispatch(self, f, lo, hi):
        if isinstance(f, TrueF):
            return np.full((self.states.shape[0], hi - lo + 1), self.top), None
        if isinstance(f, Pred):
            return self._pred(f, lo, hi)
        if isinstance(f, Not):
            v, back = self.eval(f.child, lo, hi)
            return -v, (lambda g: back(-g)) if back else None
        if isinstance(f, And):
            return self._nary(f.children, lo, hi, use_max=False, signs=None)
        if isinstance(f, Or):
            return self._nary(f.children, lo, hi, use_max=True, signs=None)
        if isinstance(f, Implies):
            return self._nary((f.lhs, f.rhs), lo, hi, use_max=True, signs=(-1.0, 1.0))
        if isinstance(f, Eventually):
            return self._window(f, lo, hi, use_max=True)
        if isinstance(f, Always):
            return self._window(f, lo, hi, use_max=False)
        if isinstance(f, Until):
            return self._until(f, lo, hi)
        raise TypeError(f"not a formula: {f!r}")

    def _pred(self, f, lo, hi):
        if f.name not in self.bindings:
            raise KeyError(f"unbound predicate {f.name!r}")
        if f.name not in self._pred_cache:
            p = self.bindings[f.name]
            if self.smooth:
                self._pred_cache[f.name] = predicate_value_grad(p, self.states, self.beta)
            else:
                self._pred_cache[f.name] = (predicate_margin(p, self.states), None)
        margin, grad = self._pred_cache[f.name]
        val = margin[:, lo:hi + 1]
        if not self.smooth:
            return val, None
        g_states = grad[:, lo:hi + 1]

        def back(g):
            self.grad[:, lo:hi + 1] += g[..., None] * g_states
        return val, back

    def _nary(self, kids, lo, hi, use_max, signs):
        vals, backs = [], []
        for k, c in enumerate(kids):
            v, b = self.eval(c, lo, hi)
            s = 1.0 if signs is None else signs[k]
            vals.append(s * v)
            backs.append((s, b))
        stacked = np.stack(vals, axis=-1)
        val, w = _reduce(stacked, self.beta, use_max)
        if not self.smooth:
            return val, None

        def back(g):
            for k, (s, b) in enumerate(backs):
                if b is not None:
                    b(s * g * w[..., k])
        return val, back

    def _check_window(self, f, hi, a):
        if hi + a > self.H:
            raise EmptyWindowError(
                f"empty evaluation window at t={hi} for {pretty_print(f)} (horizon {self.H})")

    def _windows(self, child_val, clo, lo, hi, a, b, fill):
        """(B, T, b-a+1) windows [t+a, t+b] of a child signal starting at clo,
        padded with ``fill`` past the trace end; plus the validity mask."""
        width = b - a + 1
        need_end = hi + b  # absolute index of the last window slot
        pad = need_end - (clo + child_val.shape[1] - 1)
        if pad > 0:
            child_val = np.concatenate(
                [child_val, np.full((child_val.shape[0], pad), fill)], axis=1)
        view = sliding_window_view(child_val, width, axis=1)
        start = lo + a - clo
        wins = view[:, start:start + (hi - lo + 1)]
        t = np.arange(lo, hi + 1)[:, None]
        k = np.arange(a, b + 1)[None, :]
        mask = (t + k) <= self.H
        return wins, mask

    def _scatter(self, gwin, clo, clen, lo, a):
        """Adjoint of _windows: accumulate (B, T, W) back onto the child signal."""
        B, T, W = gwin.shape
        out = np.zeros((B, clen + T + W))
        base = lo + a - clo
        if T <= W:
            for ti in range(T):
                out[:, base + ti:base + ti + W] += gwin[:, ti]
        else:
            for k in range(W):
                out[:, base + k:base + k + T] += gwin[:, :, k]
        return out[:, :clen]

    def _window(self, f, lo, hi, use_max):
        a, b = f.interval.lo, f.interval.hi
        self._check_window(f, hi, a)
        clo, chi = lo + a, min(hi + b, self.H)
        cval, cback = self.eval(f.child, clo, chi)
        fill = -np.inf if use_max else np.inf
        wins, mask = self._windows(cval, clo, lo, hi, a, b, fill)
        val, w = _reduce(wins, self.beta, use_max)
        if not self.smooth:
            return val, None

        def back(g):
            if cback is not None:
                gwin = np.where(mask, g[..., None] * w, 0.0)
                cback(self._scatter(gwin, clo, chi - clo + 1, lo, a))
        return val, back

    def _until(self, f, lo, hi):
        a, b = f.interval.lo, f.interval.hi
        self._check_window(f, hi, a)
        end = min(hi + b, self.H)
        v1, back1 = self.eval(f.lhs, lo, end)
        v2, back2 = self.eval(f.rhs, lo + a, end)
        # lhs windows start at offset 0 (inner min begins at t), rhs at offset a
        w1, mask1 = self._windows(v1, lo, lo, hi, 0, b, np.inf)
        w2, mask = self._windows(v2, lo + a, lo, hi, a, b, -np.inf)
        if not self.smooth:
            prefix = np.minimum.accumulate(w1, axis=-1)[..., a:]
            cand = np.minimum(w2, prefix)
            return cand.max(axis=-1), None

        beta = self.beta
        w2 = np.where(mask, w2, 0.0)
        nb1 = -beta * w1
        L = np.logaddexp.accumulate(nb1, axis=-1)  # log sum_{j<=k} exp(-beta v1)
        prefix = -L[..., a:] / beta
        # two-way softmin of rhs value and lhs prefix softmin
        m2 = np.minimum(w2, prefix)
        e2 = np.exp(-beta * (w2 - m2))
        ep = np.exp(-beta * (prefix - m2))
        cand = m2 - np.log(e2 + ep) / beta
        alpha = e2 / (e2 + ep)
        alpha = np.where(mask, alpha, 0.0)
        cand = np.where(mask, cand, -np.inf)
        val, wout = _lse_max(cand, beta)

        def back(g):
            gc = g[..., None] * wout
            g2win = gc * alpha
            gm = np.zeros_like(w1)
            gm[..., a:] = np.where(mask, gc * (1.0 - alpha), 0.0)
            # reverse pass through the prefix LogSumExp:
            #   dv1[j] = sum_{k>=j} gm[k] * exp(-beta v1[j] - L[k])
            W = w1.shape[-1]
            R = np.zeros(gm.shape[:-1])
            g1win = np.zeros_like(w1)
            for j in range(W - 1, -1, -1):
                if j < W - 1:
                    R = R * np.exp(L[..., j] - L[..., j + 1])
                R = R + gm[..., j]
                g1win[..., j] = np.exp(nb1[..., j] - L[..., j]) * R
            g1win = np.where(mask1, g1win, 0.0)
            if back1 is not None:
                back1(self._scatter(g1win, lo, end - lo + 1, lo, 0))
            if back2 is not None:
                back2(self._scatter(np.where(mask, g2win, 0.0), lo + a, end - lo - a + 1, lo, a))
        return val, back


def _as_batch(states):
    states = np.asarray(states, dtype=float)
    if states.ndim == 2:
        return states[None], True
    if states.ndim != 3:
        raise ValueError("states must have shape (H+1, n) or (B, H+1, n)")
    return states, False


def hard_batch(f: Formula, states, bindings, t: int = 0, top_sentinel: float = TOP_SENTINEL):
    """Hard robustness at start step ``t`` for a batch of traces (B, H+1, n) -> (B,)."""
    states, _ = _as_batch(states)
    H = states.shape[1] - 1
    if not 0 <= t <= H:
        raise ValueError(f"start step {t} outside [0, {H}]")
    ev = _Evaluator(states, bindings, None, top_sentinel)
    val, _ = ev.eval(f, t, t)
    return val[:, 0]


def smooth_batch(f: Formula, states, bindings, cfg: SmoothingConfig = SmoothingConfig(), t: int = 0):
    """Smooth robustness (B,) and its gradient w.r.t. every state (B, H+1, n)."""
    states, _ = _as_batch(states)
    H = states.shape[1] - 1
    if not 0 <= t <= H:
        raise ValueError(f"start step {t} outside [0, {H}]")
    ev = _Evaluator(states, bindings, cfg.beta, cfg.top_sentinel)
    val, back = ev.eval(f, t, t)
    if back is not None:
        back(np.ones_like(val))
    if not np.all(np.isfinite(ev.grad)):
        raise NonFiniteRobustness(f"non-finite robustness gradient for {pretty_print(f)}")
    return val[:, 0], ev.grad


def _states_of(trace):
    return trace.states if isinstance(trace, Trace) else Trace(trace).states


def robustness_hard(f: Formula, trace, bindings, t: int = 0, top_sentinel: float = TOP_SENTINEL) -> float:
    return float(hard_batch(f, _states_of(trace), bindings, t, top_sentinel)[0])


def robustness_smooth(f: Formula, trace, bindings, cfg: SmoothingConfig = SmoothingConfig(),
                      t: int = 0) -> RobustnessResult:
    val, grad = smooth_batch(f, _states_of(trace), bindings, cfg, t)
    return RobustnessResult(float(val[0]), grad[0])

