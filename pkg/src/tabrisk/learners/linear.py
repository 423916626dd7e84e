"""L1/L2 logistic regression fitted by accelerated proximal gradient.

Objective: (1/n) sum log(1 + exp(-t z)) + R(w) / (C n), t in {-1, +1},
R = 0.5 ||w||^2 (l2) or ||w||_1 (l1). The intercept is never penalized.
Step size is fixed at 1/L with L the Lipschitz bound of the smooth part.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit

from ..errors import ArityMismatch, NonBinaryLabels

PENALTIES = ("l1", "l2")


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    penalty: str
    C: float
    n_iter: int = 0

    @property
    def feature_count(self) -> int:
        return len(self.weights)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.weights):
            raise ArityMismatch(f"model expects {len(self.weights)} features, got {X.shape[-1]}")
        return X @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def to_dict(self) -> dict:
        return {"type": "linear", "weights": self.weights.tolist(), "intercept": self.intercept,
                "penalty": self.penalty, "C": self.C, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LinearModel":
        return cls(np.array(d["weights"], dtype=float), float(d["intercept"]), d["penalty"],
                   float(d["C"]), int(d.get("n_iter", 0)))


def _signs(y):
    y = np.asarray(y, dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise NonBinaryLabels("labels must be 0/1")
    return 2.0 * y - 1.0


def objective(X, y, w, b, C, penalty="l2") -> float:
    t = _signs(y)
    z = X @ w + b
    n = len(t)
    data = np.logaddexp(0.0, -t * z).mean()
    reg = 0.5 * float(w @ w) if penalty == "l2" else float(np.abs(w).sum())
    return float(data + reg / (C * n))


def smooth_gradient(X, y, w, b, C, penalty="l2"):
    """Gradient of the differentiable part (data term, plus the l2 penalty)."""
    t = _signs(y)
    n = len(t)
    z = X @ w + b
    r = -t * expit(-t * z) / n
    gw = X.T @ r
    if penalty == "l2":
        gw = gw + w / (C * n)
    return gw, float(r.sum())


def lipschitz(X, C, penalty) -> float:
    n = len(X)
    Xa = np.column_stack([X, np.ones(n)])
    L = np.linalg.norm(Xa, 2) ** 2 / (4.0 * n)
    if penalty == "l2":
        L += 1.0 / (C * n)
    return float(L)


def fit_logreg(X, y, C=1.0, penalty="l2", max_iter=1000, tol=1e-6) -> LinearModel:
    X = np.asarray(X, dtype=float)
    _signs(y)
    if not C > 0:
        raise ValueError("C must be > 0")
    if penalty not in PENALTIES:
        raise ValueError(f"penalty must be one of {PENALTIES}")
    n, f = X.shape
    step = 1.0 / lipschitz(X, C, penalty)
    shrink = step / (C * n)

    theta = np.zeros(f + 1)
    v = theta.copy()
    mom = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gw, gb = smooth_gradient(X, y, v[:f], v[f], C, penalty)
        nxt = v - step * np.append(gw, gb)
        if penalty == "l1":
            nxt[:f] = np.sign(nxt[:f]) * np.maximum(np.abs(nxt[:f]) - shrink, 0.0)
        delta = nxt - theta
        if np.max(np.abs(delta)) < tol:
            theta = nxt
            break
        # restart momentum when it points uphill
        if np.dot(v - nxt, delta) > 0:
            mom = 1.0
        mom_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * mom * mom))
        v = nxt + ((mom - 1.0) / mom_next) * delta
        theta = nxt
        mom = mom_next
    return LinearModel(theta[:f].copy(), float(theta[f]), penalty, float(C), it)
