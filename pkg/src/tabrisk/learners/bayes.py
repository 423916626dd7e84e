from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit

from ..errors import ArityMismatch, SingleClass


@dataclass
class GaussianNBModel:
    """Class priors and per-class Gaussian feature densities.

    ``epsilon`` (var_smoothing times the largest feature variance) is added to
    every per-class variance.
    """

    priors: np.ndarray
    means: np.ndarray       # (2, f)
    variances: np.ndarray   # (2, f), population variance before smoothing
    var_smoothing: float
    epsilon: float

    @property
    def feature_count(self) -> int:
        return self.means.shape[1]

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ArityMismatch(f"model expects {self.feature_count} features, got {X.shape[-1]}")
        var = self.variances + self.epsilon
        out = np.empty((len(X), 2))
        for c in (0, 1):
            ll = -0.5 * np.log(2.0 * np.pi * var[c]).sum()
            ll = ll - 0.5 * (((X - self.means[c]) ** 2) / var[c]).sum(axis=1)
            out[:, c] = np.log(self.priors[c]) + ll
        return out

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        p1 = expit(jll[:, 1] - jll[:, 0])
        return np.column_stack([1.0 - p1, p1])

    def to_dict(self) -> dict:
        return {"type": "gnb", "priors": self.priors.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist(), "var_smoothing": self.var_smoothing,
                "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d: Mapping) -> "GaussianNBModel":
        return cls(np.array(d["priors"], dtype=float), np.array(d["means"], dtype=float),
                   np.array(d["variances"], dtype=float), float(d["var_smoothing"]),
                   float(d["epsilon"]))


def fit_gnb(X, y, var_smoothing=1e-9) -> GaussianNBModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    counts = np.array([np.sum(y == 0), np.sum(y == 1)])
    if counts.min() == 0:
        raise SingleClass("both classes must be present")
    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([X[y == c].var(axis=0) for c in (0, 1)])
    eps = var_smoothing * float(X.var(axis=0).max()) if X.shape[1] else 0.0
    if eps <= 0:
        # every feature is constant; fall back to an absolute floor
        eps = var_smoothing
    return GaussianNBModel(counts / counts.sum(), means, variances, float(var_smoothing), eps)
