"""CART trees stored as flat preorder arrays.

One builder serves classification trees (weighted Gini) and the regression
trees used by boosting (gradient/Hessian statistics). A row goes left when
``x[feature] <= threshold``. Equal-quality splits resolve to the lowest
feature index, then the lowest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ArityMismatch, EmptyInput
from . import _kernels

# Relative slack when comparing split scores; only float noise is absorbed.
_TIE_RTOL = 1e-12


@dataclass
class Tree:
    feature: np.ndarray     # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray       # class-1 probability, or leaf weight for regression trees
    counts: np.ndarray | None = None  # (n_nodes, 2) unweighted class counts
    n_features: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max()) if self.n_nodes else 0

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ArityMismatch(f"tree expects {self.n_features} features, got {X.shape[-1]}")
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict_proba(self, X) -> np.ndarray:
        p1 = self.predict_value(X)
        return np.column_stack([1.0 - p1, p1])

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "counts": None if self.counts is None else self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tree":
        counts = d.get("counts")
        return cls(
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array(d["threshold"], dtype=float),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            value=np.array(d["value"], dtype=float),
            counts=None if counts is None else np.array(counts, dtype=np.int64).reshape(-1, 2),
            n_features=int(d["n_features"]),
        )


# ---------------------------------------------------------------- criteria
#
# Split search only needs side sums of two per-row statistic columns.

@dataclass
class _Criterion:
    code: int
    s0: np.ndarray
    s1: np.ndarray
    y: np.ndarray | None = None
    lam: float = 0.0
    gamma: float = 0.0

    @classmethod
    def gini(cls, y, w):
        return cls(_kernels.GINI, np.ascontiguousarray(w, dtype=float),
                   np.ascontiguousarray(w * y, dtype=float), np.ascontiguousarray(y, dtype=float))

    @classmethod
    def newton(cls, g, h, reg_lambda, reg_gamma):
        return cls(_kernels.NEWTON, np.ascontiguousarray(g, dtype=float),
                   np.ascontiguousarray(h, dtype=float), None, float(reg_lambda), float(reg_gamma))

    def leaf_value(self, t0, t1) -> float:
        if self.code == _kernels.GINI:
            return t1 / t0 if t0 > 0 else 0.0
        denom = t1 + self.lam
        return -t0 / denom if denom > 0 else 0.0

    def accept(self, score, t0, t1) -> bool:
        """Gini splits are always taken; Newton splits need positive gain."""
        if self.code == _kernels.GINI:
            return True
        denom = t1 + self.lam
        parent = t0 * t0 / denom if denom > 0 else 0.0
        gain = 0.5 * (score - parent) - self.gamma
        return gain > _TIE_RTOL * (abs(score) + 1.0)


def _n_candidates(max_features, f: int) -> int:
    if max_features in (None, "all"):
        return f
    if max_features == "sqrt":
        return max(1, int(math.sqrt(f)))
    if isinstance(max_features, int) and max_features >= 1:
        return min(max_features, f)
    raise ValueError(f"max_features must be 'sqrt', 'all' or a positive int, got {max_features!r}")


def _grow(X, crit: _Criterion, *, max_depth, min_split, mode, rng, max_features, presorted=None):
    X = np.ascontiguousarray(X, dtype=float)
    n, f = X.shape
    n_try = _n_candidates(max_features, f)
    all_feats = np.arange(f, dtype=np.int64)
    y = crit.y if crit.y is not None else np.zeros(n)
    classify = crit.code == _kernels.GINI
    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    exact = mode == "exact"
    flag = np.zeros(n, dtype=np.bool_)

    def search(node_rows, feats):
        if exact:
            return _kernels.exact_split_sorted(X, crit.s0, crit.s1, node_rows, feats, crit.code,
                                               crit.lam, _TIE_RTOL)
        u = rng.random(len(feats))
        return _kernels.random_split(X, crit.s0, crit.s1, node_rows, feats, u, crit.code,
                                     crit.lam, _TIE_RTOL)

    def find_split(r):
        if n_try == f:
            pos, thr, score = search(r, all_feats)
            return None if pos < 0 else (int(all_feats[pos]), thr, score)
        perm = rng.permutation(f).astype(np.int64)
        feats = np.sort(perm[:n_try])
        pos, thr, score = search(r, feats)
        if pos >= 0:
            return int(feats[pos]), thr, score
        # every sampled feature was constant here: keep drawing one at a time
        for j in perm[n_try:]:
            one = np.array([j], dtype=np.int64)
            pos, thr, score = search(r, one)
            if pos >= 0:
                return int(j), thr, score
        return None

    # exact mode carries (f, n_node) per-feature orderings, random mode a flat row list
    root = np.arange(n, dtype=np.int64)
    if exact:
        root = presorted if presorted is not None else _kernels.presort(X, root)
    stack = [(root, 0, -1, False)]
    while stack:
        r, depth, parent, is_right = stack.pop()
        flat = r[0] if exact else r
        t0, t1, n1 = _kernels.node_summary(crit.s0, crit.s1, y, flat)
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(crit.leaf_value(t0, t1))
        size = len(flat)
        if classify:
            counts.append((size - n1, n1))
        if parent >= 0:
            (right if is_right else left)[parent] = node
        if max_depth is not None and depth >= max_depth:
            continue
        if size < max(min_split, 2) or (classify and n1 in (0, size)):
            continue
        split = find_split(r)
        if split is None or not crit.accept(split[2], t0, t1):
            continue
        j, thr, _ = split
        if exact:
            rl, rr = _kernels.partition_sorted(X, r, j, thr, flag)
        else:
            rl, rr = _kernels.partition(X, r, j, thr)
        feature[node] = j
        threshold[node] = thr
        stack.append((rr, depth + 1, node, True))
        stack.append((rl, depth + 1, node, False))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
        counts=np.array(counts, dtype=np.int64).reshape(-1, 2) if classify else None,
        n_features=f,
    )


def class_weights(y, class_weight) -> np.ndarray:
    """Per-row weights; 'balanced' gives class c the weight n / (2 * n_c)."""
    y = np.asarray(y)
    if class_weight in (None, "none"):
        return np.ones(len(y))
    if class_weight != "balanced":
        raise ValueError(f"class_weight must be None or 'balanced', got {class_weight!r}")
    n = len(y)
    w = np.empty(n)
    for c in (0, 1):
        nc = int(np.sum(y == c))
        w[y == c] = n / (2.0 * nc) if nc else 0.0
    return w


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) == 0 or X.shape[1] == 0:
        raise EmptyInput("need at least one row and one feature")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    return X, y


def fit_tree(X, y, max_depth=None, min_split=2, class_weight=None, mode="exact", rng=None,
             max_features="all", sample_weight=None) -> Tree:
    """Grow a Gini classification tree.

    ``mode="exact"`` scans midpoints between sorted unique values;
    ``mode="random_threshold"`` draws one uniform threshold in [min, max)
    per candidate feature (ExtraTrees). ``rng`` is required for the random
    mode and for feature subsampling.
    """
    X, y = _check_xy(X, y)
    if len(X) < min_split:
        raise EmptyInput(f"{len(X)} rows is fewer than min_split={min_split}")
    if mode not in ("exact", "random_threshold"):
        raise ValueError(f"unknown split mode {mode!r}")
    y = y.astype(float)
    w = class_weights(y, class_weight) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if rng is None:
        if mode != "exact" or _n_candidates(max_features, X.shape[1]) < X.shape[1]:
            raise ValueError("rng is required for random splits or feature subsampling")
    return _grow(X, _Criterion.gini(y, w), max_depth=max_depth, min_split=min_split, mode=mode, rng=rng,
                 max_features=max_features)


def fit_regression_tree(X, g, h, max_depth=3, reg_lambda=0.0, reg_gamma=0.0, min_split=2,
                        presorted=None) -> Tree:
    """Newton-step regression tree: leaf weight -G/(H+lambda), gain-gated splits.

    ``presorted`` (from ``presort(X)``) lets repeated fits on one X skip sorting.
    """
    X = np.ascontiguousarray(X, dtype=float)
    crit = _Criterion.newton(g, h, reg_lambda, reg_gamma)
    return _grow(X, crit, max_depth=max_depth, min_split=min_split, mode="exact", rng=None,
                 max_features="all", presorted=presorted)


def presort(X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    return _kernels.presort(X, np.arange(len(X), dtype=np.int64))


def gini(counts) -> float:
    n = sum(counts)
    return 1.0 - sum((c / n) ** 2 for c in counts) if n else 0.0
