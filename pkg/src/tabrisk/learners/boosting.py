"""Gradient boosting for the logistic loss.

``first_order`` fits each tree to the residuals y - p with mean-residual
leaves. ``second_order`` uses g = p - y, h = p(1 - p), leaf weight
-G/(H + lambda) and the gamma-penalized gain; this is the XGBoost-style
learner. Both predict sigmoid(base_score + learning_rate * sum of trees).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit

from ..errors import ArityMismatch, EmptyInput, NonBinaryLabels
from .tree import Tree, fit_regression_tree, presort

VARIANTS = ("first_order", "second_order")
_RATE_CLIP = 1e-15


def logistic_loss(y, f):
    """Per-row negative log-likelihood at raw score f."""
    return np.logaddexp(0.0, f) - y * f


def grad_hess(y, f):
    p = expit(f)
    return p - y, p * (1.0 - p)


def newton_leaf_weight(g, h, reg_lambda) -> float:
    return float(-np.sum(g) / (np.sum(h) + reg_lambda))


def split_gain(gl, hl, gr, hr, reg_lambda, reg_gamma) -> float:
    def term(G, H):
        return G * G / (H + reg_lambda)
    return 0.5 * (term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr)) - reg_gamma


@dataclass
class BoostedModel:
    variant: str
    base_score: float
    trees: list[Tree]
    learning_rate: float
    reg_lambda: float
    reg_gamma: float
    feature_count: int
    max_depth: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.reg_lambda < 0 or self.reg_gamma < 0:
            raise ValueError("reg_lambda and reg_gamma must be >= 0")
        if self.variant == "first_order" and (self.reg_lambda or self.reg_gamma):
            raise ValueError("first_order boosting has no lambda/gamma regularization")

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ArityMismatch(f"model expects {self.feature_count} features, got {X.shape[-1]}")
        f = np.full(len(X), self.base_score)
        for t in self.trees:
            f += self.learning_rate * t.predict_value(X)
        return f

    def predict_proba(self, X) -> np.ndarray:
        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def to_dict(self) -> dict:
        return {
            "type": "boosted",
            "variant": self.variant,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "reg_lambda": self.reg_lambda,
            "reg_gamma": self.reg_gamma,
            "feature_count": self.feature_count,
            "max_depth": self.max_depth,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BoostedModel":
        return cls(
            variant=d["variant"],
            base_score=float(d["base_score"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            learning_rate=float(d["learning_rate"]),
            reg_lambda=float(d["reg_lambda"]),
            reg_gamma=float(d["reg_gamma"]),
            feature_count=int(d["feature_count"]),
            max_depth=d.get("max_depth"),
        )


def fit_boosted(X, y, n_estimators=100, max_depth=3, learning_rate=0.1, reg_lambda=None,
                reg_gamma=0.0, variant="second_order", seed=0) -> BoostedModel:
    """Greedy additive fit; deterministic, so ``seed`` is accepted for interface symmetry."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0 or X.shape[1] == 0:
        raise EmptyInput("need at least one row and one feature")
    if not np.isin(y, (0.0, 1.0)).all():
        raise NonBinaryLabels("labels must be 0/1")
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if not learning_rate > 0:
        raise ValueError("learning_rate must be > 0")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if reg_lambda is None:
        reg_lambda = 1.0 if variant == "second_order" else 0.0
    if variant == "first_order":
        if reg_lambda or reg_gamma:
            raise ValueError("first_order boosting has no lambda/gamma regularization")

    rate = float(np.clip(y.mean(), _RATE_CLIP, 1.0 - _RATE_CLIP))
    base = float(np.log(rate / (1.0 - rate)))
    f = np.full(len(y), base)
    trees = []
    order = presort(X)
    for _ in range(n_estimators):
        if variant == "second_order":
            g, h = grad_hess(y, f)
        else:
            g = expit(f) - y
            h = np.ones(len(y))
        tree = fit_regression_tree(X, g, h, max_depth=max_depth, reg_lambda=reg_lambda,
                                   reg_gamma=reg_gamma, presorted=order)
        trees.append(tree)
        f += learning_rate * tree.predict_value(X)
    return BoostedModel(variant, base, trees, float(learning_rate), float(reg_lambda),
                        float(reg_gamma), X.shape[1], max_depth)
