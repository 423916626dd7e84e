import json

import numpy as np
import pytest

from tabrisk.data import FeatureMatrix
from tabrisk.errors import ArityMismatch, SingularSystem, TooFewRows
from tabrisk.explainer import (
    LimeConfig,
    discretize_stats,
    explain,
    fit_surrogate,
    kernel_weights,
    perturb,
    weighted_r2,
    weighted_ridge,
    write_top_features,
)


class _OnlyFirst:
    """Step in feature 0 at 0 (close to its median); other features ignored."""

    feature_count = 4

    def predict_proba(self, X):
        p = np.where(np.asarray(X)[:, 0] > 0.0, 0.9, 0.1)
        return np.column_stack([1 - p, p])


def _training(n=400, seed=0):
    return np.random.default_rng(seed).normal(size=(n, 4))


def test_quartile_edges_uniform():
    (st,) = discretize_stats(np.arange(1, 101, dtype=float).reshape(-1, 1), ["a"])
    assert st.edges == pytest.approx([25.75, 50.5, 75.25])
    assert len(st.bin_mean) == 4 and st.perturbable
    assert st.bin_of(25.75) == 0 and st.bin_of(25.76) == 1 and st.bin_of(100) == 3


def test_constant_column_not_perturbable():
    X = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
    const, var = discretize_stats(X, ["c", "v"])
    assert not const.perturbable and var.perturbable
    Z, Xp = perturb([3.0, 4.0], [const, var], 200, seed=1)
    assert (Z[:, 0] == 1).all() and (Xp[:, 0] == 3.0).all()


def test_skewed_column_merges_empty_bins():
    col = np.r_[np.zeros(90), np.arange(1, 11.0)].reshape(-1, 1)
    (st,) = discretize_stats(col, ["s"])
    bins = np.searchsorted(st.edges, col[:, 0], side="left")
    assert np.all(np.bincount(bins, minlength=len(st.edges) + 1) > 0)


def test_categorical_frequencies():
    col = np.r_[np.zeros(70), np.ones(30)].reshape(-1, 1)
    (st,) = discretize_stats(col, ["g=f"], ["onehot"])
    assert st.categorical and list(st.values) == [0.0, 1.0]
    assert st.freqs == pytest.approx([0.7, 0.3])
    Z, Xp = perturb([1.0], [st], 20_000, seed=2)
    assert set(np.unique(Xp)) <= {0.0, 1.0}
    assert abs(Xp[1:, 0].mean() - 0.3) < 0.02
    assert np.array_equal(Z[:, 0], (Xp[:, 0] == 1.0).astype(float))


def test_too_few_rows():
    with pytest.raises(TooFewRows):
        discretize_stats(np.zeros((3, 1)), ["a"])


def test_perturb_row_zero_and_keep_rate():
    X = _training()
    stats = discretize_stats(X, list("abcd"))
    x = X[7]
    Z, Xp = perturb(x, stats, 5000, seed=11)
    assert (Z[0] == 1).all() and np.array_equal(Xp[0], x)
    assert 0.47 <= Z[1:].mean() <= 0.53
    for j, st in enumerate(stats):
        own = st.bin_of(x[j])
        bins = np.searchsorted(st.edges, Xp[1:, j], side="left")
        # kept samples stay in the instance's bin, the rest leave it
        assert np.array_equal(bins == own, Z[1:, j] == 1)
        assert (Xp[:, j] >= X[:, j].min()).all() and (Xp[:, j] <= X[:, j].max()).all()


def test_perturb_deterministic():
    stats = discretize_stats(_training(), list("abcd"))
    a = perturb(np.zeros(4), stats, 500, seed=5)
    b = perturb(np.zeros(4), stats, 500, seed=5)
    c = perturb(np.zeros(4), stats, 500, seed=6)
    assert np.array_equal(a[1], b[1]) and not np.array_equal(a[1], c[1])


def test_kernel_weights():
    Z = np.array([[1, 1], [0, 1], [0, 0.0]])
    w = kernel_weights(Z, 1.0)
    assert w == pytest.approx([1.0, np.exp(-1), np.exp(-2)])
    assert LimeConfig().width(16) == 3.0
    with pytest.raises(ValueError):
        kernel_weights(Z, 0.0)


def test_ridge_recovers_linear_target():
    g = np.random.default_rng(0)
    Z = g.integers(0, 2, (2000, 3)).astype(float)
    t = 2 * Z[:, 0] - Z[:, 1] + 0.1
    w = g.random(2000) + 0.1
    coef, b = weighted_ridge(Z, t, w, 1e-6)
    assert coef == pytest.approx([2, -1, 0], rel=0.05, abs=0.05)
    assert b == pytest.approx(0.1, abs=0.01)
    assert weighted_r2(t, Z @ coef + b, w) > 0.999


def test_ridge_constant_target():
    g = np.random.default_rng(1)
    Z = g.integers(0, 2, (300, 4)).astype(float)
    coef, b = weighted_ridge(Z, np.full(300, 0.7), np.ones(300), 1.0)
    assert np.allclose(coef, 0) and b == pytest.approx(0.7)
    e = fit_surrogate(Z, np.full(300, 0.7), np.ones(300), 2, 1.0)
    assert e.local_fidelity == 1.0


def test_ridge_duplicate_columns():
    g = np.random.default_rng(2)
    z = g.integers(0, 2, 500).astype(float)
    Z = np.column_stack([z, z])
    coef, _ = weighted_ridge(Z, 3 * z, np.ones(500), 1.0)
    assert coef[0] == pytest.approx(coef[1]) and coef.sum() == pytest.approx(3, rel=0.01)
    with pytest.raises(SingularSystem):
        weighted_ridge(Z, 3 * z, np.ones(500), 0.0)


def test_explain_finds_informative_feature():
    X = _training()
    cfg = LimeConfig(n_samples=3000, k_features=2, seed=3)
    row = int(np.argmax(X[:, 0]))
    e = explain(_OnlyFirst(), X[row], X, cfg, names=list("abcd"))
    assert e.feature_weights[0][0] == "a"
    assert abs(e.feature_weights[0][1]) > 10 * abs(e.feature_weights[1][1])
    assert e.predicted_prob == pytest.approx(0.9)
    assert e.local_fidelity > 0.5 and len(e.feature_weights) == 2
    again = explain(_OnlyFirst(), X[row], X, cfg, names=list("abcd"))
    assert again == e


def test_explain_accepts_feature_matrix():
    X = _training()
    fm = FeatureMatrix(X, list("abcd"), ["numeric"] * 4)
    e = explain(_OnlyFirst(), X[1], fm, LimeConfig(n_samples=500, k_features=1))
    assert e.feature_weights[0][0] == "a"


def test_explain_arity():
    X = _training()
    with pytest.raises(ArityMismatch):
        explain(_OnlyFirst(), X[0, :3], X)
    with pytest.raises(ArityMismatch):
        explain(_OnlyFirst(), X[0, :3], X[:, :3])


def test_config_validation():
    for bad in ({"n_samples": 10}, {"kernel_width": 0.0}, {"k_features": 0}, {"ridge_lambda": -1}):
        with pytest.raises(ValueError):
            LimeConfig(**bad)


def test_exports(tmp_path):
    X = _training()
    e = explain(_OnlyFirst(), X[0], X, LimeConfig(n_samples=300, k_features=3), names=list("abcd"))
    e.write_json(tmp_path / "e.json")
    doc = json.loads((tmp_path / "e.json").read_text())
    assert [d["feature"] for d in doc["feature_weights"]] == [n for n, _ in e.feature_weights]
    write_top_features(tmp_path / "top.csv", [0, 5], [e, e])
    lines = (tmp_path / "top.csv").read_text().splitlines()
    assert lines[0].startswith("row,rank,feature") and len(lines) == 7
