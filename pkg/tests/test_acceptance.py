"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured numbers, then
asserts. Run just these with ``pytest -m acceptance -s``.
"""

import functools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import (CORPUS_PREDICATES, corpus, lse_profile, random_formula, rho, rho_unique, signals,
                     smooth_value_ld)
from stlstein.bench import BenchmarkPlan, run_benchmark, run_method
from stlstein.dynamics import DynamicsSpec, backprop_controls, rollout, rollout_jacobians
from stlstein.optimizer import SvpioConfig, run_svpio, transport
from stlstein.baselines import run_gradient_ascent
from stlstein.scenarios import builtin
from stlstein.semantics import SmoothingConfig, robustness_hard, robustness_smooth
from toy import Toy, bimodal, gaussian

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {k}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


@functools.lru_cache(maxsize=None)
def _run(scenario, method, seed):
    return run_method(builtin(scenario), method, seed)


def _rates(scenario, method, seeds):
    res = [_run(scenario, method, s) for s in seeds]
    rho_ = np.array([r.robustness for r in res])
    return float(np.mean(rho_ > 0)), float(np.median(rho_)), sum(r.wall_time_s for r in res)


CORPUS = corpus(1000, seed=0)


def test_criterion_1_oracle_equivalence(report):
    t0 = time.perf_counter()
    bad = 0
    for f, states in CORPUS:
        sig = signals(CORPUS_PREDICATES, states)
        if robustness_hard(f, states, CORPUS_PREDICATES) != rho(f, sig, 0, len(states) - 1):
            bad += 1
    dt = time.perf_counter() - t0
    report(1, bad == 0 and dt < 10, f"{bad} mismatches over {len(CORPUS)} pairs in {dt:.1f}s (limit 10s)")


def test_criterion_2_smooth_hard_sandwich(report):
    t0 = time.perf_counter()
    violations, ratio_fails, unique = 0, [], 0
    for k, (f, states) in enumerate(CORPUS):
        H = len(states) - 1
        hard = robustness_hard(f, states, CORPUS_PREDICATES)
        depth, fan = lse_profile(f)
        err = {}
        for beta in (10.0, 100.0):
            s = robustness_smooth(f, states, CORPUS_PREDICATES, SmoothingConfig(beta)).value
            err[beta] = abs(s - hard)
            if err[beta] > depth * np.log(fan) / beta + 1e-9:
                violations += 1
        if rho_unique(f, signals(CORPUS_PREDICATES, states), 0, H)[1]:
            unique += 1
            if err[100.0] > err[10.0] / 10:
                ratio_fails.append((k, err[10.0], err[100.0]))
    dt = time.perf_counter() - t0
    ok = violations == 0 and not ratio_fails and dt < 30
    worst = ", ".join(f"#{k}: e10={a:.4f} e100={b:.4f}" for k, a, b in ratio_fails[:5])
    report(2, ok, f"{violations} sandwich violations; {len(ratio_fails)}/{unique} unique-optimum instances "
                  f"miss the 10x ratio [{worst}]; {dt:.1f}s (limit 30s)")


def test_criterion_3_gradient_fidelity(report):
    # the finite differences run on an independent long-double evaluator: in float64 the
    # rounding floor (~eps |rho| / delta) swamps gradients below ~1e-6 at this step size
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst, value_gap, count = 0.0, 0.0, 0
    delta = np.longdouble(1e-5)
    while count < 200:
        m = int(rng.integers(1, 3))
        H = int(rng.integers(1, 11))
        names = tuple(CORPUS_PREDICATES) if m == 2 else ("h0", "box0")
        f = random_formula(rng, 4, H, names, true_rate=0.0)
        spec = DynamicsSpec("multi_agent_double_integrator", m, dt=0.1)
        preds = {n: CORPUS_PREDICATES[n] for n in names}
        x0 = rng.normal(scale=0.5, size=4 * m)
        u = rng.uniform(-2, 2, size=(H, 2 * m))

        def value(u):
            return smooth_value_ld(f, preds, x0, u, spec.dt, m, 10.0)

        r = robustness_smooth(f, rollout(spec, x0, u), preds, SmoothingConfig(10.0))
        g = backprop_controls(rollout_jacobians(spec, H), r.per_state_grad)
        value_gap = max(value_gap, abs(float(value(u)) - r.value))
        fd = np.zeros_like(u)
        for idx in np.ndindex(u.shape):
            d = np.zeros(u.shape, dtype=np.longdouble)
            d[idx] = delta
            fd[idx] = float((value(u + d) - value(u - d)) / (2 * delta))
        scale = max(np.abs(fd).max(), 1e-8)
        worst = max(worst, np.abs(g - fd).max() / scale)
        count += 1
    dt = time.perf_counter() - t0
    report(3, worst <= 1e-4 and dt < 60, f"max relative error {worst:.2e} over {count} instances "
                                         f"(limit 1e-4; smooth values agree to {value_gap:.1e}) "
                                         f"in {dt:.1f}s (limit 60s)")


def test_criterion_4_reach_avoid_anchor(report):
    sc = builtin("reach_avoid")
    t0 = time.perf_counter()
    res = [run_svpio(sc, SvpioConfig(10, 20, seed=s)) for s in range(20)]
    dt = time.perf_counter() - t0
    rho_ = np.array([r.robustness for r in res])
    sat, med = int((rho_ > 0).sum()), float(np.median(rho_))
    ok = sat >= 18 and 0.02 <= med <= 0.5 and dt < 120
    report(4, ok, f"{sat}/20 satisfied (need 18), median robustness {med:.3f} (band [0.02, 0.5]), {dt:.1f}s")


def test_criterion_5_ablation_ordering(report):
    seeds = range(30)
    t0 = time.perf_counter()
    lines, ok = [], True
    for name in ("corridor", "long_horizon"):
        sv, sv_med, _ = _rates(name, "svpio", seeds)
        gd, gd_med, _ = _rates(name, "gd", seeds)
        ok &= sv - gd >= 0.2
        line = f"{name}: svpio {sv:.2f} (median {sv_med:.3f}) vs gd {gd:.2f}"
        if name == "corridor":
            fd, fd_med, _ = _rates(name, "fd-svgd", seeds)
            ok &= sv > fd
            line += f" vs fd-svgd {fd:.2f} (median {fd_med:.3f})"
        lines.append(line)
    dt = time.perf_counter() - t0
    ok &= dt < 1800
    report(5, ok, "; ".join(lines) + f"; {dt:.0f}s (limit 1800s)")


def test_criterion_6_multi_agent_feasibility(report):
    lines, ok = [], True
    for name in ("button_order", "sync_goals", "corridor"):
        n = builtin(name).solver["svpio"]["particles"]
        sat, med, _ = _rates(name, "svpio", range(30))
        ok &= sat >= 0.5 and n <= 64
        lines.append(f"{name}: {sat:.2f} satisfied (N={n}, median {med:.3f})")
    report(6, ok, "; ".join(lines) + " (need >= 0.50 each)")


def test_criterion_7_svgd_correctness(report):
    t0 = time.perf_counter()
    mu, sigma = np.array([1.0, -0.5]), 0.5
    U, *_ = transport(Toy(gaussian(mu, sigma)), SvpioConfig(100, 1000, 0.1, 1.0, seed=0))
    X = U.reshape(100, 2)
    mean_err = np.abs(X.mean(0) - mu).max() / sigma
    var_err = np.abs(X.var(0) / sigma ** 2 - 1).max()
    a, b = np.array([-2.0, 0.0]), np.array([2.0, 0.0])
    obj = Toy(bimodal(a, b))
    U, *_ = transport(obj, SvpioConfig(50, 500, 0.05, 0.1, seed=0))
    X = U.reshape(50, 2)
    near_a = int((np.linalg.norm(X - a, axis=1) < 0.3).sum())
    near_b = int((np.linalg.norm(X - b, axis=1) < 0.3).sum())
    U1, *_ = transport(obj, SvpioConfig(1, 500, 0.05, 0.1), U0=np.array([[[-0.5, 1.0]]]))
    single = [bool(np.linalg.norm(U1.ravel() - c) < 0.3) for c in (a, b)]
    dt = time.perf_counter() - t0
    ok = mean_err <= 0.05 and var_err <= 0.25 and near_a > 0 and near_b > 0 and single == [True, False] \
        and dt < 60
    report(7, ok, f"gaussian mean err {mean_err:.4f} sigma (limit 0.05), variance err {100 * var_err:.1f}% "
                  f"(limit 25%); bimodal {near_a} near a, {near_b} near b; single particle reaches "
                  f"{'a' if single[0] else ''}{'b' if single[1] else ''} only; {dt:.1f}s")


def _payloads(root: Path):
    out = {}
    for p in sorted(root.rglob("*.json")):
        d = json.loads(p.read_text())
        d.pop("timing", None)
        out[str(p.relative_to(root))] = json.dumps(d, sort_keys=True)
    for p in sorted(root.rglob("*.csv")):
        if p.name != "report.csv":
            out[str(p.relative_to(root))] = p.read_text()
    return out


def test_criterion_8_determinism(report, tmp_path):
    overrides = {"svpio": {"iterations": 10}, "gd": {"iterations": 10}, "mppi": {"iterations": 20},
                 "fd-svgd": {"particles": 4, "iterations": 3}}
    outs = {}
    for workers in (1, 8):
        plan = BenchmarkPlan(["reach_avoid", "corridor"], ["svpio", "gd", "mppi", "fd-svgd"], [0, 1, 2],
                             overrides, str(tmp_path / f"w{workers}"), workers)
        # mppi needs a single goal zone, so the corridor/mppi cells are errors in both runs
        run_benchmark(plan)
        outs[workers] = _payloads(tmp_path / f"w{workers}")
    same = outs[1] == outs[8]
    diff = sorted(k for k in outs[1] if outs[1].get(k) != outs[8].get(k))
    report(8, same and len(outs[1]) > 0,
           f"{len(outs[1])} artifacts compared under 1 and 8 workers; {len(diff)} differ {diff[:3]}")


def test_criterion_9_ablation_identity(report):
    sc = builtin("reach_avoid")
    a = run_svpio(sc, SvpioConfig(particles=1, iterations=10, epsilon=0.2, lam=0.1, seed=3))
    b = run_gradient_ascent(sc, 10, 0.2, seed=3, lam=0.1)
    ok = np.array_equal(a.controls, b.controls) and np.array_equal(a.states, b.states) \
        and a.robustness == b.robustness
    report(9, ok, f"N=1 svpio vs gradient ascent, 10 iterations: max |du| "
                  f"{np.abs(a.controls - b.controls).max():.1e}, robustness {a.robustness:.6f} vs {b.robustness:.6f}")
