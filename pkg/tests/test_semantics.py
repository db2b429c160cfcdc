import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rprvkit.logic import NegationNotEliminable, formula_length, parse, to_pnf
from rprvkit.semantics import (
    AdjacencyWeights,
    ExplicitWeights,
    ProximityWeights,
    StarWeights,
    TrajectoryTooShort,
    escape,
    eval_bool_stl,
    eval_bool_strel,
    eval_robust_stl,
    eval_robust_strel,
    graph_at,
    min_distance,
    reach,
    robustness_trace,
)

from _oracles import (
    escape_oracle,
    floyd_warshall,
    random_int_weights,
    random_stl,
    random_strel,
    reach_oracle,
    stl_bool_oracle,
    stl_oracle,
    strel_oracle,
)

EXAMPLE3 = np.array([
    [-1, -1, -1, -1, 1, 1, 2, 2, 2],
    [1, 1, 1, 2, 2, 2, 3, 3, 3],
], dtype=float).T
EXAMPLE3_FORMULA = "G[0,5] F[0,3] ((s[0] >= 0) and (s[1] >= 0))"

EXAMPLE1_STATES = np.array([[[0.0, 0.0], [1.0, 2.0], [2.0, 1.0], [2.0, 3.0]]])


def test_example3_robustness_and_violation():
    f = parse(EXAMPLE3_FORMULA)
    assert eval_robust_stl(f, EXAMPLE3) == -1.0
    assert eval_bool_stl(f, EXAMPLE3) is False


def test_true_is_infinite():
    x = np.zeros((3, 1))
    assert eval_robust_stl(parse("true"), x, 2) == math.inf
    assert eval_bool_stl(parse("true"), x, 2) is True


def test_until_empty_inner_window_is_infinite():
    # U[1,1]: the inner window (0, 1) is empty, so only the right operand matters
    f = parse("(s[0] >= 5) U[1,1] (s[1] >= 0)")
    x = np.array([[0.0, 0.0], [0.0, 2.0]])
    assert eval_robust_stl(f, x) == 2.0


def test_trajectory_too_short():
    with pytest.raises(TrajectoryTooShort):
        eval_robust_stl(parse("G[0,5] (s[0] >= 0)"), np.zeros((5, 1)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_negation_flips_sign(seed):
    rng = np.random.default_rng(seed)
    f = parse(random_stl(rng, 2, 2, max_hi=4))
    x = rng.integers(-3, 4, size=(12, 2)).astype(float)
    g = parse(f"not {f.text()}")
    assert eval_robust_stl(g, x) == -eval_robust_stl(f, x)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stl_matches_definition(seed):
    rng = np.random.default_rng(seed)
    f = parse(random_stl(rng, 3, 3, max_hi=4))
    T = 13
    x = rng.integers(-3, 4, size=(T, 3)).astype(float)
    tau = int(rng.integers(0, 2))
    if tau + formula_length(f) >= T:
        return
    assert eval_robust_stl(f, x, tau) == stl_oracle(f, x, tau)
    assert eval_bool_stl(f, x, tau) == stl_bool_oracle(f, x, tau)


def test_example1_graph():
    w = ProximityWeights(threshold=2.0)
    W = w.matrix(EXAMPLE1_STATES, 0)
    assert W[0, 1] == math.inf
    assert np.all(np.diag(W) == math.inf)
    assert W[1, 2] == 1.0


def test_line_graph_min_distance():
    w = AdjacencyWeights(((1, 2), (2, 3)))
    snap = graph_at(w, np.zeros((1, 3, 1)), 0)
    assert snap.distances[0, 2] == 2.0
    assert np.array_equal(snap.distances, snap.distances.T)


def test_min_distance_matches_floyd_warshall():
    rng = np.random.default_rng(3)
    for _ in range(50):
        w = random_int_weights(rng, 5)
        assert np.array_equal(min_distance(w), floyd_warshall(w))


def test_escape_true_everywhere_is_infinite():
    w = AdjacencyWeights(((1, 2), (2, 3)))
    f = parse("E[0,inf] true", "strel")
    x = np.zeros((1, 3, 1))
    for agent in (1, 2, 3):
        assert eval_robust_strel(f, x, w, 0, agent) == math.inf


def test_predicate_at_agent_two():
    f = parse("s[1] >= 1.5", "strel")
    w = ProximityWeights(threshold=2.0)
    assert eval_robust_strel(f, EXAMPLE1_STATES, w, 0, 2) == pytest.approx(0.5)


def test_somewhere_includes_own_agent():
    f = parse("somewhere[0,3] (s[0] >= 1)", "strel")
    w = AdjacencyWeights(())
    x = np.array([[[2.0], [0.0]]])
    assert eval_bool_strel(f, x, w, 0, 1) is True
    assert eval_robust_strel(f, x, w, 0, 1) == 1.0


def test_unbounded_somewhere_ignores_unreachable_agents():
    f = parse("somewhere[0,inf] (s[0] >= 1)", "strel")
    w = AdjacencyWeights(())
    x = np.array([[[0.0], [2.0]]])
    assert eval_bool_strel(f, x, w, 0, 1) is False
    assert eval_robust_strel(f, x, w, 0, 1) == -1.0


def test_agent_out_of_range():
    with pytest.raises(ValueError):
        eval_robust_strel(parse("s[0] >= 0", "strel"), np.zeros((1, 2, 1)), None, 0, 3)


def test_zero_weight_edge_at_upper_bound():
    # a zero-weight edge reached exactly at d2 must still be propagated
    w = np.array([[np.inf, 2.0, np.inf], [2.0, np.inf, 0.0], [np.inf, 0.0, np.inf]])
    s1 = np.array([5.0, 4.0, 3.0])
    s2 = np.array([-9.0, -9.0, 7.0])
    out = reach(w, s1, s2, 0.0, 2.0)
    assert out[0] == 4.0


def test_reach_and_escape_match_oracles():
    rng = np.random.default_rng(11)
    for _ in range(150):
        L = int(rng.integers(1, 6))
        w = random_int_weights(rng, L)
        s1 = rng.integers(-4, 5, L).astype(float)
        s2 = rng.integers(-4, 5, L).astype(float)
        d1 = float(rng.integers(0, 6))
        d2 = math.inf if rng.random() < 0.3 else float(rng.integers(int(d1), 9))
        assert np.array_equal(reach(w, s1, s2, d1, d2), reach_oracle(w, s1, s2, d1, d2))
        assert np.array_equal(escape(w, min_distance(w), s1, d1, d2), escape_oracle(w, s1, d1, d2))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strel_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    f = parse(random_strel(rng, 2, 2), "strel")
    L = int(rng.integers(1, 5))
    T = 8
    mats = np.stack([random_int_weights(rng, L) for _ in range(T)])
    mats[:, np.arange(L), np.arange(L)] = 0.0
    x = rng.integers(-3, 4, size=(T, L, 2)).astype(float)
    agent = int(rng.integers(1, L + 1))
    got = eval_robust_strel(f, x, ExplicitWeights(mats), 0, agent)
    assert got == strel_oracle(f, x, ExplicitWeights(mats).matrices, 0, agent - 1)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strel_soundness(seed):
    rng = np.random.default_rng(seed)
    f = parse(random_strel(rng, 3, 2), "strel")
    L = int(rng.integers(1, 5))
    T = 12
    x = rng.normal(size=(T, L, 2))
    w = ProximityWeights(threshold=1.5, scale=2.0)
    agent = int(rng.integers(1, L + 1))
    rho = eval_robust_strel(f, x, w, 0, agent)
    if rho != 0:
        assert (rho > 0) == eval_bool_strel(f, x, w, 0, agent)


def test_single_agent_strel_equals_stl():
    rng = np.random.default_rng(5)
    for _ in range(50):
        f = parse(random_stl(rng, 3, 2, max_hi=3))
        x = rng.normal(size=(10, 2))
        assert eval_robust_strel(f, x[:, None, :], None) == eval_robust_stl(f, x)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_in_predicate_values(seed):
    rng = np.random.default_rng(seed)
    try:
        f = to_pnf(parse(random_strel(rng, 3, 2), "strel"))
    except NegationNotEliminable:
        return
    preds = f.predicates()
    if not preds:
        return
    L, T = 3, formula_length(f) + 2
    x = rng.normal(size=(T, L, 2))
    w = StarWeights(hub=1, scale=1.0)
    base = {p.id: p.comparison.evaluate(x) for p in preds}
    bumped = {k: v.copy() for k, v in base.items()}
    k = preds[int(rng.integers(len(preds)))].id
    bumped[k][int(rng.integers(T)), int(rng.integers(L))] += abs(rng.normal()) + 0.1
    lo = robustness_trace(f, x, w, base)[0, 0]
    hi = robustness_trace(f, x, w, bumped)[0, 0]
    assert hi >= lo


def test_explicit_weights_validation():
    with pytest.raises(ValueError):
        ExplicitWeights(np.array([[[0.0, -1.0], [-1.0, 0.0]]]))
    with pytest.raises(ValueError):
        ExplicitWeights(np.array([[[0.0, 1.0], [2.0, 0.0]]]))
