"""Rank-weighted soft voting and F1-optimal decision thresholds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ArityMismatch, LengthMismatch, SingleClass
from .learners import ModelArtifact, predict_proba

_SUM_TOL = 1e-12


def rank_weights(cv_scores: Sequence[float]) -> list[float]:
    """Linear rank weights: rank r of M (1 = best) gets (M - r + 1) / (M(M+1)/2).

    Equal scores keep input order, so the earlier member ranks higher.
    """
    s = np.asarray(cv_scores, dtype=float)
    if s.ndim != 1 or len(s) < 2:
        raise ValueError("need at least two member scores")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    m = len(s)
    order = np.argsort(-s, kind="stable")
    ranks = np.empty(m, dtype=np.int64)
    ranks[order] = np.arange(1, m + 1)
    total = m * (m + 1) / 2
    return [(m - r + 1) / total for r in ranks]


def weighted_average(probas: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """sum_i w_i * probas[i], accumulated in member order."""
    if len(probas) != len(weights):
        raise LengthMismatch(f"{len(probas)} members vs {len(weights)} weights")
    out = np.zeros_like(np.asarray(probas[0], dtype=float))
    for p, w in zip(probas, weights):
        out += w * np.asarray(p, dtype=float)
    return out


@dataclass
class EnsembleModel:
    members: list[ModelArtifact]
    weights: list[float]
    threshold: float = 0.5
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("an ensemble needs at least one member")
        if len(self.weights) != len(self.members):
            raise LengthMismatch(f"{len(self.members)} members vs {len(self.weights)} weights")
        w = np.asarray(self.weights, dtype=float)
        if (w <= 0).any() or not np.isfinite(w).all():
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        counts = {m.feature_count for m in self.members}
        if len(counts) != 1:
            raise ArityMismatch(f"members disagree on feature count: {sorted(counts)}")
        self.weights = [float(v) for v in w]

    @property
    def feature_count(self) -> int:
        return self.members[0].feature_count

    @property
    def preprocessor(self):
        return self.members[0].preprocessor

    def member_probas(self, X) -> list[np.ndarray]:
        return [m.predict_proba(X) for m in self.members]

    def predict_proba(self, X) -> np.ndarray:
        return weighted_average(self.member_probas(X), self.weights)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(np.int64)

    def to_dict(self) -> dict:
        return {"kind": "ensemble", "weights": list(self.weights), "threshold": self.threshold,
                "metadata": dict(self.metadata), "members": [m.to_dict() for m in self.members]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EnsembleModel":
        return cls([ModelArtifact.from_dict(m) for m in d["members"]], [float(w) for w in d["weights"]],
                   float(d["threshold"]), dict(d.get("metadata", {})))


def soft_vote(ens: EnsembleModel, X) -> np.ndarray:
    """(n, 2) weighted mean of member class probabilities."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != ens.feature_count:
        raise ArityMismatch(f"ensemble expects {ens.feature_count} features, got {X.shape[1]}")
    return ens.predict_proba(X)


def ensemble_predict(ens: EnsembleModel, X) -> np.ndarray:
    return (soft_vote(ens, X)[:, 1] >= ens.threshold).astype(np.int64)


@dataclass(frozen=True)
class ThresholdSweep:
    candidates: np.ndarray
    f1: np.ndarray
    chosen: float

    @property
    def best_f1(self) -> float:
        return float(self.f1.max())


def f1_at_thresholds(p, y, thresholds) -> np.ndarray:
    """F1 of the rule p >= t for every t, via sorted cumulative counts."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y)
    t = np.asarray(thresholds, dtype=float)
    order = np.argsort(p, kind="stable")
    ps = p[order]
    ys = (y[order] == 1).astype(np.int64)
    # positives among rows with p >= t: total minus those strictly below t
    below = np.searchsorted(ps, t, side="left")
    cum_pos = np.concatenate([[0], np.cumsum(ys)])
    n_pos = int(ys.sum())
    tp = n_pos - cum_pos[below]
    predicted = len(p) - below
    fp = predicted - tp
    fn = n_pos - tp
    denom = 2 * tp + fp + fn
    return np.where(tp > 0, 2 * tp / np.maximum(denom, 1), 0.0)


def optimize_threshold(p, y_true) -> ThresholdSweep:
    """Smallest candidate threshold attaining the maximum F1."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y_true)
    if len(p) != len(y):
        raise LengthMismatch(f"{len(p)} probabilities vs {len(y)} labels")
    if not ((y == 0).any() and (y == 1).any()):
        raise SingleClass("threshold search needs both classes")
    candidates = np.unique(np.concatenate([p, [0.5]]))
    f1 = f1_at_thresholds(p, y, candidates)
    chosen = float(candidates[int(np.argmax(f1))])
    return ThresholdSweep(candidates, f1, chosen)


def clamp_threshold(t: float, eps: float = 1e-9) -> float:
    """Keep a swept threshold inside the open interval an EnsembleModel requires."""
    return float(min(max(t, eps), 1.0 - eps))
