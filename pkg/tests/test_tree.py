import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import best_gini_split, brute_tree
from tabrisk.errors import ArityMismatch, EmptyInput
from tabrisk.learners.tree import Tree, class_weights, fit_regression_tree, fit_tree


def _tree_preorder(t: Tree):
    out = []
    for i in range(t.n_nodes):
        out.append(("leaf", t.value[i]) if t.feature[i] < 0 else (int(t.feature[i]), t.threshold[i]))
    return out


def _instance(seed):
    g = np.random.default_rng(seed)
    n = int(g.integers(2, 65))
    f = int(g.integers(1, 5))
    if g.random() < 0.5:
        X = g.integers(0, 5, (n, f)).astype(float)      # many ties
    else:
        X = np.round(g.normal(size=(n, f)), 3)
    y = (g.random(n) < g.uniform(0.2, 0.8)).astype(int)
    return X, y


def test_two_points():
    t = fit_tree(np.array([[0.0], [1.0]]), np.array([0, 1]))
    assert t.feature[0] == 0 and t.threshold[0] == 0.5
    assert np.array_equal(t.predict_proba(np.array([[0.0], [1.0]])), [[1, 0], [0, 1]])


def test_pure_labels_single_leaf():
    t = fit_tree(np.arange(6.0).reshape(3, 2), np.ones(3))
    assert t.n_nodes == 1 and t.value[0] == 1.0


def test_empty_input():
    with pytest.raises(EmptyInput):
        fit_tree(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(EmptyInput):
        fit_tree(np.zeros((3, 0)), np.zeros(3))


def test_eight_point_fixture_root_matches_bruteforce():
    X = np.array([[1, 5], [2, 4], [3, 7], [4, 1], [5, 2], [6, 8], [7, 3], [8, 6]], float)
    y = np.array([0, 0, 1, 0, 0, 1, 1, 1])
    t = fit_tree(X, y)
    j, thr = best_gini_split(X, y)
    assert (t.feature[0], t.threshold[0]) == (j, thr)
    # both features separate at 5.5 with weighted child Gini 1.6; the lower index wins
    assert (j, thr) == (0, 5.5)


@pytest.mark.parametrize("seed", range(50))
def test_root_split_matches_exhaustive_search(seed):
    X, y = _instance(seed)
    t = fit_tree(X, y)
    expect = best_gini_split(X, y)
    if expect is None or y.min() == y.max():
        assert t.n_nodes == 1
    else:
        assert (int(t.feature[0]), float(t.threshold[0])) == expect


@pytest.mark.parametrize("seed", range(15))
def test_whole_tree_matches_recursive_oracle(seed):
    X, y = _instance(1000 + seed)
    t = fit_tree(X, y, max_depth=4)
    got = _tree_preorder(t)
    expect = brute_tree(X, y, max_depth=4)
    assert len(got) == len(expect)
    for a, b in zip(got, expect):
        assert a[0] == b[0]
        assert a[1] == pytest.approx(b[1], abs=1e-12)


def test_unlimited_depth_fits_distinct_rows(rng):
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 2, 60)
    t = fit_tree(X, y)
    assert np.array_equal((t.predict_proba(X)[:, 1] >= 0.5).astype(int), y)


def test_max_depth_and_min_split(rng):
    X = rng.normal(size=(80, 2))
    y = rng.integers(0, 2, 80)
    assert fit_tree(X, y, max_depth=2).depth() <= 2
    t = fit_tree(X, y, min_split=30)
    internal = np.flatnonzero(t.feature >= 0)
    assert all(t.counts[i].sum() >= 30 for i in internal)


def test_balanced_weights():
    y = np.array([0, 0, 0, 1])
    w = class_weights(y, "balanced")
    assert w.tolist() == [4 / 6, 4 / 6, 4 / 6, 2.0]


def test_leaf_counts_and_probability(rng):
    X = rng.normal(size=(40, 2))
    y = rng.integers(0, 2, 40)
    t = fit_tree(X, y, max_depth=2)
    leaves = t.apply(X)
    for node in np.unique(leaves):
        sel = y[leaves == node]
        assert t.counts[node].tolist() == [int((sel == 0).sum()), int((sel == 1).sum())]
        assert t.value[node] == pytest.approx(sel.mean())


def test_random_threshold_mode(rng):
    X = rng.normal(size=(50, 3))
    y = (X[:, 0] > 0).astype(int)
    a = fit_tree(X, y, mode="random_threshold", rng=np.random.default_rng(1))
    b = fit_tree(X, y, mode="random_threshold", rng=np.random.default_rng(1))
    assert np.array_equal(a.threshold, b.threshold)
    for i in np.flatnonzero(a.feature >= 0):
        assert np.isfinite(a.threshold[i])
    with pytest.raises(ValueError):
        fit_tree(X, y, mode="random_threshold")


def test_arity_and_round_trip(rng):
    X = rng.normal(size=(30, 2))
    t = fit_tree(X, rng.integers(0, 2, 30))
    with pytest.raises(ArityMismatch):
        t.apply(np.zeros((2, 3)))
    back = Tree.from_dict(t.to_dict())
    assert np.array_equal(back.predict_proba(X), t.predict_proba(X))


@given(st.integers(0, 10_000))
def test_probabilities_valid(seed):
    X, y = _instance(seed)
    p = fit_tree(X, y, max_depth=3).predict_proba(X)
    assert ((p >= 0) & (p <= 1)).all()
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


def _brute_newton_split(X, g, h, lam, gamma):
    best = None
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            t = (a + b) / 2
            L = X[:, j] <= t
            gl, hl, gr, hr = g[L].sum(), h[L].sum(), g[~L].sum(), h[~L].sum()
            gain = 0.5 * (gl ** 2 / (hl + lam) + gr ** 2 / (hr + lam) - (gl + gr) ** 2 / (hl + hr + lam)) - gamma
            if best is None or gain > best[0] + 1e-9 * (abs(best[0]) + 1):
                best = (gain, j, t)
    return best


@pytest.mark.parametrize("seed", range(20))
def test_regression_tree_root_matches_bruteforce(seed):
    g_ = np.random.default_rng(seed)
    X = np.round(g_.normal(size=(40, 3)), 2)
    p = g_.uniform(0.05, 0.95, 40)
    y = (g_.random(40) < p).astype(float)
    g, h = p - y, p * (1 - p)
    t = fit_regression_tree(X, g, h, max_depth=1, reg_lambda=1.0, reg_gamma=0.0)
    gain, j, thr = _brute_newton_split(X, g, h, 1.0, 0.0)
    if gain > 0:
        assert (t.feature[0], t.threshold[0]) == (j, thr)
        L = X[:, j] <= thr
        assert t.value[t.left[0]] == pytest.approx(-g[L].sum() / (h[L].sum() + 1.0), rel=1e-12)
    else:
        assert t.n_nodes == 1


def test_regression_tree_gamma_blocks_splits(rng):
    X = rng.normal(size=(30, 2))
    g = rng.normal(size=30)
    t = fit_regression_tree(X, g, np.ones(30), max_depth=3, reg_lambda=1.0, reg_gamma=1e6)
    assert t.n_nodes == 1
    assert t.value[0] == pytest.approx(-g.sum() / 31.0)
