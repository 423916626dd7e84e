"""Random Forest (bagging + exact splits) and ExtraTrees (full sample + random thresholds)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ArityMismatch, EmptyInput
from ..rng import check_seed, stream
from .tree import Tree, class_weights, fit_tree

MODES = ("bagging", "extra")


@dataclass
class ForestModel:
    trees: list[Tree]
    mode: str
    params: dict
    feature_count: int
    seed: int
    n_train: int = 0
    bootstrap: bool = field(init=False)

    def __post_init__(self):
        self.bootstrap = self.mode == "bagging"

    def tree_stream(self, t: int) -> np.random.Generator:
        return tree_stream(self.seed, t)

    def bootstrap_indices(self, t: int) -> np.ndarray | None:
        """Regenerate the in-bag rows of tree ``t`` (None for ExtraTrees)."""
        if not self.bootstrap:
            return None
        return self.tree_stream(t).integers(0, self.n_train, size=self.n_train)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ArityMismatch(f"forest expects {self.feature_count} features, got {X.shape[-1]}")
        p1 = np.mean([t.predict_value(X) for t in self.trees], axis=0)
        return np.column_stack([1.0 - p1, p1])

    def to_dict(self) -> dict:
        return {
            "type": "forest",
            "mode": self.mode,
            "params": dict(self.params),
            "feature_count": self.feature_count,
            "seed": self.seed,
            "n_train": self.n_train,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ForestModel":
        return cls(
            trees=[Tree.from_dict(t) for t in d["trees"]],
            mode=d["mode"],
            params=dict(d["params"]),
            feature_count=int(d["feature_count"]),
            seed=int(d["seed"]),
            n_train=int(d["n_train"]),
        )


def tree_stream(seed: int, t: int) -> np.random.Generator:
    return stream(seed, f"tree{t}")


def _fit_one(X, y, w_full, t, seed, mode, max_depth, min_split, max_features):
    rng = tree_stream(seed, t)
    n = len(y)
    if mode == "bagging":
        idx = rng.integers(0, n, size=n)
        return fit_tree(X[idx], y[idx], max_depth=max_depth, min_split=min_split, mode="exact",
                        rng=rng, max_features=max_features, sample_weight=w_full[idx])
    return fit_tree(X, y, max_depth=max_depth, min_split=min_split, mode="random_threshold",
                    rng=rng, max_features=max_features, sample_weight=w_full)


def fit_forest(X, y, n_estimators=100, max_depth=None, min_split=2, class_weight=None,
               max_features="sqrt", mode="bagging", seed=0, n_jobs=1) -> ForestModel:
    """Fit ``n_estimators`` trees, each on its own ``tree{t}`` stream of ``seed``.

    Because every tree owns a pre-split stream, ``n_jobs > 1`` (process
    pool) produces the same model as the sequential run.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyInput("need at least one row")
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    seed = check_seed(seed)
    w_full = class_weights(y, class_weight)
    args = (seed, mode, max_depth, min_split, max_features)
    if n_jobs == 1:
        trees = [_fit_one(X, y, w_full, t, *args) for t in range(n_estimators)]
    else:
        from joblib import Parallel, delayed
        trees = Parallel(n_jobs=n_jobs)(
            delayed(_fit_one)(X, y, w_full, t, *args) for t in range(n_estimators))
    params = {"n_estimators": n_estimators, "max_depth": max_depth, "min_split": min_split,
              "class_weight": class_weight, "max_features": max_features}
    return ForestModel(trees, mode, params, X.shape[1], seed, n_train=len(y))
