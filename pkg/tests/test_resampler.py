import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tabrisk.errors import AllSafe, EmptyDangerSet, SingleClass, TooFewMinority
from tabrisk.resampler import (
    ResampleConfig,
    adasyn,
    adasyn_quotas,
    borderline_smote,
    class_gap,
    danger_set,
    expected_gap_bound,
    random_oversample,
    resample,
    smote,
)


def _imbalanced(seed, n_major=30, n_minor=8, f=2, overlap=1.5):
    g = np.random.default_rng(seed)
    X = np.vstack([g.normal(0, 1, (n_major, f)), g.normal(overlap, 1, (n_minor, f))])
    y = np.r_[np.zeros(n_major, int), np.ones(n_minor, int)]
    return X, y


def test_ros_counts_and_duplicates():
    X, y = _imbalanced(0, 9, 3)
    r = random_oversample(X, y, seed=1)
    assert np.bincount(r.labels).tolist() == [9, 9]
    assert r.synthetic_count == 6
    minority = X[y == 1]
    for s in r.features[len(X):]:
        assert any(np.array_equal(s, m) for m in minority)
    assert np.array_equal(r.provenance.neighbor, np.full(6, -1))


def test_ros_balanced_is_noop():
    X = np.arange(16.0).reshape(8, 2)
    y = np.array([0, 1] * 4)
    r = random_oversample(X, y, seed=3)
    assert r.synthetic_count == 0 and np.array_equal(r.features, X)


def test_single_class():
    with pytest.raises(SingleClass):
        random_oversample(np.zeros((3, 1)), np.zeros(3), 0)


def test_smote_two_point_segment():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [5, 5], [6, 6], [7, 7]])
    y = np.array([1, 1, 0, 0, 0])
    r = smote(X, y, ResampleConfig("smote", k_neighbors=1, seed=9))
    assert r.synthetic_count == 1
    s = r.features[-1]
    assert s[0] == s[1] and 0 <= s[0] < 1


def test_smote_too_few_minority():
    X = np.arange(10.0).reshape(5, 2)
    with pytest.raises(TooFewMinority):
        smote(X, np.array([1, 0, 0, 0, 0]), ResampleConfig("smote", k_neighbors=1))
    with pytest.raises(TooFewMinority):
        smote(X, np.array([1, 1, 0, 0, 0]), ResampleConfig("smote", k_neighbors=2))


def _brute_danger(X, y, m):
    """Danger/noise classification with an explicit O(n^2) neighbor scan."""
    danger, noise = [], []
    for i in np.flatnonzero(y == 1):
        d = [(float(np.sum((X[i] - X[j]) ** 2)), j) for j in range(len(X)) if j != i]
        nn = [j for _, j in sorted(d)[:m]]
        maj = sum(y[j] == 0 for j in nn)
        if m / 2 <= maj < m:
            danger.append(i)
        elif maj == m:
            noise.append(i)
    return danger, noise


def test_borderline_twelve_point_fixture():
    # minority: far safe pair, two border points, one isolated noise point
    X = np.array([[10, 10], [10.5, 10],                         # safe minority 0-1
                  [2.0, 0.2], [2.0, -0.2],                      # border minority 2-3
                  [-3.0, 0.0],                                  # noise minority 4
                  [1.0, 0], [1.2, 0.1], [1.1, -0.1], [-3.2, -0.1], [-2.9, 0.2], [-3.1, 0.3],
                  [30, -30]], float)
    y = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
    cfg = ResampleConfig("bsmote", k_neighbors=2, m_neighbors=4, seed=5)
    danger, noise = danger_set(X, y, 1, 4)
    bd, bn = _brute_danger(X, y, 4)
    assert danger.tolist() == bd == [2, 3]
    assert noise.tolist() == bn == [4]
    r = borderline_smote(X, y, cfg)
    assert set(r.provenance.parent.tolist()) == {2, 3}
    assert class_gap(r) == 0


def test_borderline_empty_danger():
    X = np.vstack([np.zeros((6, 2)) + np.arange(6)[:, None] * 0.01, np.full((3, 2), 50.0) + np.arange(3)[:, None]])
    y = np.r_[np.zeros(6, int), np.ones(3, int)]
    with pytest.raises(EmptyDangerSet):
        borderline_smote(X, y, ResampleConfig("bsmote", k_neighbors=1, m_neighbors=2))


def test_adasyn_three_point_quotas():
    # minority at 0, 1, 10 on a line; majority at 9.5, 11, 12, 13
    X = np.array([[0.0], [1.0], [10.0], [9.5], [11.0], [12.0], [13.0]])
    y = np.array([1, 1, 1, 0, 0, 0, 0])
    k, G = 2, 1
    brute = []
    for i in range(3):
        d = sorted((abs(X[i, 0] - X[j, 0]), j) for j in range(7) if j != i)[:k]
        brute.append(sum(y[j] == 0 for _, j in d) / k)
    r = np.array(brute)
    expect = np.floor(r / r.sum() * G + 0.5).astype(int)
    assert adasyn_quotas(X, y, 1, k, G).tolist() == expect.tolist()
    assert brute == [0.5, 0.5, 1.0]


def test_adasyn_two_point_quotas():
    # row 0's nearest neighbour is majority (r=1), row 1's is row 0 (r=0)
    X = np.array([[0.0], [-10.0], [0.5], [1], [2], [3], [4], [5]])
    y = np.array([1, 1, 0, 0, 0, 0, 0, 0])
    assert adasyn_quotas(X, y, 1, 1, 4).tolist() == [4, 0]


def test_adasyn_all_safe():
    X = np.array([[0.0], [0.1], [0.2], [50], [51], [52], [53], [54]])
    y = np.array([1, 1, 1, 0, 0, 0, 0, 0])
    with pytest.raises(AllSafe):
        adasyn(X, y, ResampleConfig("adasyn", k_neighbors=2))


@given(st.integers(0, 10_000), st.sampled_from(["ros", "smote", "bsmote", "adasyn"]),
       st.integers(12, 40), st.integers(4, 10))
def test_resampler_invariants(seed, method, n_major, n_minor):
    X, y = _imbalanced(seed, n_major, n_minor)
    cfg = ResampleConfig(method, k_neighbors=3, m_neighbors=6, seed=seed)
    try:
        r = resample(X, y, cfg)
    except (EmptyDangerSet, AllSafe):
        return
    n = len(X)
    assert np.array_equal(r.features[:n], X) and np.array_equal(r.labels[:n], y)
    assert len(r.provenance) == r.synthetic_count == len(r.labels) - n
    if method == "adasyn":
        assert class_gap(r) <= expected_gap_bound(y)
    else:
        assert class_gap(r) == 0
    if method != "ros":
        p = r.provenance
        s = X[p.parent] + p.coef[:, None] * (X[p.neighbor] - X[p.parent])
        assert np.max(np.abs(s - r.features[n:]), initial=0.0) <= 1e-12
        assert ((p.coef >= 0) & (p.coef < 1)).all()
    again = resample(X, y, cfg)
    assert again.features.tobytes() == r.features.tobytes()


def test_provenance_csv(tmp_path):
    X, y = _imbalanced(1)
    r = smote(X, y, ResampleConfig("smote", k_neighbors=3, seed=2))
    r.write_provenance(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert len(lines) == r.synthetic_count + 1
