import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import CORPUS_PREDICATES, LD, corpus, holds, lse_profile, margin_ld, rho, rho_smooth, signals
from stlstein.predicates import PredicateDef
from stlstein.semantics import (EmptyWindowError, NonFiniteRobustness, SmoothingConfig, Trace, hard_batch,
                                robustness_hard, robustness_smooth, smooth_batch, softmax, softmin)
from stlstein.stl import (Always, And, Eventually, Implies, Interval, Not, Or, Pred, TrueF, Until,
                          parse_formula)

# predicates that read one raw state coordinate, so signals can be written down directly
RAW = {f"s{k}": PredicateDef(f"s{k}", "custom_affine", a=tuple(float(j == k) for j in range(4)))
       for k in range(4)}


def _trace(*signals):
    cols = np.array(signals, dtype=float).T
    return np.hstack([cols, np.zeros((len(cols), 4 - cols.shape[1]))])


def test_until_worked_example():
    states = _trace([1.0, 0.2, 0.5], [-1.0, 0.4, 0.9])
    f = Until(Interval(0, 2), Pred("s0"), Pred("s1"))
    assert robustness_hard(f, states, RAW) == pytest.approx(0.2, abs=0)
    # independent enumeration over t' in {0, 1, 2}
    cand = [min(s1, min([1.0, 0.2, 0.5][:k + 1])) for k, s1 in enumerate([-1.0, 0.4, 0.9])]
    assert max(cand) == robustness_hard(f, states, RAW)


def test_until_smooth_close_at_beta_100():
    states = _trace([1.0, 0.2, 0.5], [-1.0, 0.4, 0.9])
    f = Until(Interval(0, 2), Pred("s0"), Pred("s1"))
    r = robustness_smooth(f, states, RAW, SmoothingConfig(100.0))
    assert abs(r.value - 0.2) <= np.log(3) / 100


def test_not_and_examples():
    states = _trace([0.5], [0.3], [-0.1])
    assert robustness_hard(Not(Pred("s0")), states, RAW) == -0.5
    assert robustness_hard(And((Pred("s1"), Pred("s2"))), states, RAW) == -0.1


def test_softmin_closed_form():
    assert softmin([0.0, 0.0], 1.0) == pytest.approx(-np.log(2))
    assert softmax([0.0, 0.0], 1.0) == pytest.approx(np.log(2))


def test_softmax_overflow_safe():
    assert softmax([1e4, 1e4 - 1], 100.0) == pytest.approx(1e4, abs=1e-12)
    assert softmin([-1e4, 5.0], 100.0) == pytest.approx(-1e4)


def test_top_sentinel():
    states = _trace([0.3, 0.1])
    assert robustness_hard(TrueF(), states, RAW) == 1e6
    assert robustness_hard(Not(TrueF()), states, RAW) == -1e6
    # Eventually is evaluated without the sentinel branch
    assert robustness_hard(Eventually(Interval(0, 1), Pred("s0")), states, RAW) == 0.3
    r = robustness_smooth(Eventually(Interval(0, 1), Pred("s0")), states, RAW, SmoothingConfig(10.0))
    assert abs(r.value - 0.3) < np.log(2) / 10


def test_empty_window():
    states = _trace([0.1] * 4)
    f = Eventually(Interval(3, 5), Pred("s0"))
    with pytest.raises(EmptyWindowError):
        robustness_hard(f, states, RAW, t=1)
    with pytest.raises(EmptyWindowError):
        robustness_smooth(f, states, RAW, SmoothingConfig(), t=1)
    # the window is clipped to the trace, not rejected, while t + a <= H
    assert robustness_hard(f, states, RAW, t=0) == 0.1


def test_non_finite_reported():
    big = {"big": PredicateDef("big", "custom_affine", a=(1e308, 1e308), b=0.0)}
    states = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NonFiniteRobustness, match="big"), np.errstate(over="ignore"):
        robustness_smooth(Eventually(Interval(0, 1), Pred("big")), states, big, SmoothingConfig())


def test_trace_validation():
    with pytest.raises(ValueError):
        Trace(np.array([[0.0, np.nan]]))
    with pytest.raises(ValueError):
        Trace(np.zeros((0, 2)))
    t = Trace(np.zeros((6, 4)), dt=0.1)
    assert (t.horizon, t.n) == (5, 4)


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    f = parse_formula("G[0,3] (h0 or box1) and (box0 U[1,4] h1)")
    X = rng.normal(size=(5, 9, 8))
    batch = hard_batch(f, X, CORPUS_PREDICATES)
    single = [robustness_hard(f, x, CORPUS_PREDICATES) for x in X]
    np.testing.assert_array_equal(batch, single)
    vals, grads = smooth_batch(f, X, CORPUS_PREDICATES)
    for k, x in enumerate(X):
        r = robustness_smooth(f, x, CORPUS_PREDICATES)
        assert vals[k] == r.value
        np.testing.assert_array_equal(grads[k], r.per_state_grad)


# ------------------------------------------------------------ oracle comparisons

CORPUS = corpus(300, seed=11)


@pytest.mark.parametrize("idx", range(0, 300, 3))
def test_hard_matches_bruteforce(idx):
    f, states = CORPUS[idx]
    H = len(states) - 1
    sig = signals(CORPUS_PREDICATES, states)
    for t in range(H + 1):
        try:
            want = rho(f, sig, t, H)
        except Exception:
            with pytest.raises(EmptyWindowError):
                robustness_hard(f, states, CORPUS_PREDICATES, t=t)
            continue
        assert robustness_hard(f, states, CORPUS_PREDICATES, t=t) == want


def test_sign_soundness():
    for f, states in CORPUS:
        H = len(states) - 1
        sig = signals(CORPUS_PREDICATES, states)
        r = robustness_hard(f, states, CORPUS_PREDICATES)
        if r > 0:
            assert holds(f, sig, 0, H)
        elif r < 0:
            assert not holds(f, sig, 0, H)


def test_sugar_expansions_exact():
    rng = np.random.default_rng(5)
    a, b = Pred("h0"), Pred("box1")
    iv = Interval(1, 4)
    pairs = [
        (Eventually(iv, a), Until(iv, TrueF(), a)),
        (Always(iv, a), Not(Eventually(iv, Not(a)))),
        (Or((a, b)), Not(And((Not(a), Not(b))))),
        (Implies(a, b), Or((Not(a), b))),
    ]
    for _ in range(50):
        X = rng.normal(size=(8, 8))
        for sugar, prim in pairs:
            assert robustness_hard(sugar, X, CORPUS_PREDICATES) == robustness_hard(prim, X, CORPUS_PREDICATES)


def test_negation_antisymmetry():
    for f, states in CORPUS[:60]:
        assert robustness_hard(Not(f), states, CORPUS_PREDICATES) == -robustness_hard(f, states, CORPUS_PREDICATES)
        s = robustness_smooth(f, states, CORPUS_PREDICATES)
        n = robustness_smooth(Not(f), states, CORPUS_PREDICATES)
        assert n.value == -s.value
        np.testing.assert_array_equal(n.per_state_grad, -s.per_state_grad)


@pytest.mark.parametrize("beta", [1.0, 10.0, 100.0])
def test_smooth_matches_recursive_oracle(beta):
    for f, states in CORPUS[:150]:
        sig = {n: [margin_ld(p, [LD(v) for v in s], LD(beta)) for s in states] for n, p in CORPUS_PREDICATES.items()}
        want = float(rho_smooth(f, sig, 0, len(states) - 1, beta))
        got = robustness_smooth(f, states, CORPUS_PREDICATES, SmoothingConfig(beta)).value
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("beta", [10.0, 100.0])
def test_smooth_sandwich(beta):
    for f, states in CORPUS:
        hard = robustness_hard(f, states, CORPUS_PREDICATES)
        smooth = robustness_smooth(f, states, CORPUS_PREDICATES, SmoothingConfig(beta)).value
        depth, fan = lse_profile(f)
        assert abs(smooth - hard) <= depth * np.log(fan) / beta + 1e-9


def test_gradients_match_finite_differences():
    eps = 1e-5
    for f, states in CORPUS[:40]:
        cfg = SmoothingConfig(10.0)
        r = robustness_smooth(f, states, CORPUS_PREDICATES, cfg)
        assert r.per_state_grad.shape == states.shape
        fd = np.zeros_like(states)
        for idx in np.ndindex(states.shape):
            d = np.zeros_like(states)
            d[idx] = eps
            fd[idx] = (robustness_smooth(f, states + d, CORPUS_PREDICATES, cfg).value
                       - robustness_smooth(f, states - d, CORPUS_PREDICATES, cfg).value) / (2 * eps)
        scale = max(np.abs(fd).max(), 1e-8)
        assert np.abs(r.per_state_grad - fd).max() / scale <= 1e-4


# ------------------------------------------------------------ LSE properties

vectors = arrays(float, st.integers(1, 8), elements=st.floats(-50, 50))


@settings(max_examples=200, deadline=None)
@given(vectors, st.sampled_from([0.5, 1.0, 10.0, 100.0]))
def test_lse_sandwich(v, beta):
    k = len(v)
    assert v.max() - 1e-9 <= softmax(v, beta) <= v.max() + np.log(k) / beta + 1e-9
    assert v.min() - np.log(k) / beta - 1e-9 <= softmin(v, beta) <= v.min() + 1e-9


@settings(max_examples=100, deadline=None)
@given(vectors)
def test_beta_monotone(v):
    mx = [softmax(v, b) for b in (1.0, 10.0, 100.0)]
    mn = [softmin(v, b) for b in (1.0, 10.0, 100.0)]
    assert mx[0] + 1e-12 >= mx[1] and mx[1] + 1e-12 >= mx[2]
    assert mn[0] <= mn[1] + 1e-12 and mn[1] <= mn[2] + 1e-12
