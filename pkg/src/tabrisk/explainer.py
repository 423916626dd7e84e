"""Tabular LIME: quartile perturbations, exponential kernel, ridge surrogate.

The surrogate is fit in the interpretable space Z, where Z[i, j] = 1 iff
sample i keeps the instance's bin (numeric) or category (one-hot/binary) on
feature j. Explanations target the positive-class probability.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import truncnorm

from .errors import ArityMismatch, SingularSystem, TooFewRows
from .rng import stream

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LimeConfig:
    n_samples: int = 5000
    kernel_width: float | None = None   # None: 0.75 * sqrt(f)
    k_features: int = 5
    ridge_lambda: float = 1.0
    seed: int = 0
    keep_probability: float = 0.5

    def __post_init__(self):
        if self.n_samples < 100:
            raise ValueError("n_samples must be >= 100")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ValueError("kernel_width must be > 0")
        if self.k_features < 1:
            raise ValueError("k_features must be >= 1")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")
        if not 0 < self.keep_probability < 1:
            raise ValueError("keep_probability must be in (0, 1)")

    def width(self, n_features: int) -> float:
        return self.kernel_width if self.kernel_width is not None else 0.75 * math.sqrt(n_features)


@dataclass(frozen=True)
class FeatureStats:
    """Numeric: 3 quartile edges + per-bin mean/std and bounds. Categorical: values/frequencies."""

    name: str
    categorical: bool
    edges: np.ndarray = field(default_factory=lambda: np.empty(0))
    bin_lo: np.ndarray = field(default_factory=lambda: np.empty(0))
    bin_hi: np.ndarray = field(default_factory=lambda: np.empty(0))
    bin_mean: np.ndarray = field(default_factory=lambda: np.empty(0))
    bin_std: np.ndarray = field(default_factory=lambda: np.empty(0))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))
    freqs: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def perturbable(self) -> bool:
        if self.categorical:
            return len(self.values) > 1
        return len(self.bin_mean) > 1

    def bin_of(self, x: float) -> int:
        """Bin index: bin b covers (edges[b-1], edges[b]]."""
        return int(np.searchsorted(self.edges, x, side="left"))


def _populated_edges(col: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Drop edges until every bin (edges[b-1], edges[b]] holds at least one value."""
    kept = []
    lo = -np.inf
    for e in edges:
        if np.any((col > lo) & (col <= e)):
            kept.append(float(e))
            lo = e
    if kept and not np.any(col > kept[-1]):
        kept.pop()
    return np.array(kept)


def discretize_stats(values, names: Sequence[str], kinds: Sequence[str] | None = None) -> list[FeatureStats]:
    X = np.asarray(values, dtype=float)
    if X.ndim != 2 or len(X) < 4:
        raise TooFewRows("need at least 4 rows to estimate quartiles")
    kinds = list(kinds) if kinds is not None else ["numeric"] * X.shape[1]
    out = []
    for j, name in enumerate(names):
        col = X[:, j]
        if kinds[j] != "numeric":
            vals, counts = np.unique(col, return_counts=True)
            out.append(FeatureStats(name, True, values=vals, freqs=counts / counts.sum()))
            continue
        edges = _populated_edges(col, np.unique(np.percentile(col, [25, 50, 75])))
        bins = np.searchsorted(edges, col, side="left")
        lo_all, hi_all = float(col.min()), float(col.max())
        bounds = np.concatenate([[lo_all], edges, [hi_all]])
        mu = np.array([col[bins == b].mean() for b in range(len(edges) + 1)])
        sd = np.array([col[bins == b].std() for b in range(len(edges) + 1)])
        out.append(FeatureStats(name, False, edges=edges, bin_lo=bounds[:-1], bin_hi=bounds[1:],
                                bin_mean=mu, bin_std=sd))
    return out


def _draw_in_bin(st: FeatureStats, b: np.ndarray, rng) -> np.ndarray:
    """Truncated-normal draws from each requested bin's fit, clipped to its bounds."""
    out = np.empty(len(b))
    for k in np.unique(b):
        sel = np.flatnonzero(b == k)
        lo, hi, mu, sd = st.bin_lo[k], st.bin_hi[k], st.bin_mean[k], st.bin_std[k]
        if sd <= 0 or not lo < hi:
            out[sel] = mu
            continue
        a, c = (lo - mu) / sd, (hi - mu) / sd
        out[sel] = np.clip(truncnorm.rvs(a, c, loc=mu, scale=sd, size=len(sel), random_state=rng), lo, hi)
    return out


def perturb(instance, stats: Sequence[FeatureStats], n_samples: int, seed: int,
            keep_probability: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """(Z, X') with row 0 the instance itself and Z[0] all ones.

    Features are drawn one after another from a single stream, keep flags
    first, so the draw order is fixed by (seed, n_samples, feature order).
    """
    x = np.asarray(instance, dtype=float)
    if len(x) != len(stats):
        raise ArityMismatch(f"instance has {len(x)} features, stats cover {len(stats)}")
    rng = stream(seed, "lime")
    f = len(stats)
    Z = np.ones((n_samples, f))
    Xp = np.tile(x, (n_samples, 1))
    m = n_samples - 1
    for j, st in enumerate(stats):
        if not st.perturbable:
            continue
        keep = rng.random(m) < keep_probability
        if st.categorical:
            draws = rng.choice(len(st.values), size=m, p=st.freqs)
            vals = st.values[draws]
            Xp[1:, j] = vals
            Z[1:, j] = (vals == x[j]).astype(float)
            continue
        own = st.bin_of(x[j])
        n_bins = len(st.bin_mean)
        # uniform over the other bins: offset 1..n_bins-1 from the own bin
        other = (own + rng.integers(1, n_bins, size=m)) % n_bins
        b = np.where(keep, own, other)
        Xp[1:, j] = _draw_in_bin(st, b, rng)
        Z[1:, j] = keep.astype(float)
    return Z, Xp


def kernel_weights(Z, width: float) -> np.ndarray:
    if not width > 0:
        raise ValueError("width must be > 0")
    d2 = ((np.asarray(Z, dtype=float) - 1.0) ** 2).sum(axis=1)
    return np.exp(-d2 / (width * width))


def weighted_ridge(Z, target, weights, ridge_lambda: float) -> tuple[np.ndarray, float]:
    """Weighted ridge with an unpenalized intercept, via centred normal equations."""
    Z = np.asarray(Z, dtype=float)
    t = np.asarray(target, dtype=float)
    w = np.asarray(weights, dtype=float)
    sw = w.sum()
    if not sw > 0:
        raise ValueError("weights must have a positive sum")
    zbar = w @ Z / sw
    tbar = float(w @ t / sw)
    Zc = Z - zbar
    A = Zc.T @ (w[:, None] * Zc) + ridge_lambda * np.eye(Z.shape[1])
    rhs = Zc.T @ (w * (t - tbar))
    if ridge_lambda == 0 and (Z.shape[1] and np.linalg.cond(A) > _COND_LIMIT):
        raise SingularSystem("surrogate normal equations are singular; use ridge_lambda > 0")
    coef = np.linalg.solve(A, rhs) if Z.shape[1] else np.empty(0)
    return coef, tbar - float(zbar @ coef)


def weighted_r2(target, fitted, weights) -> float:
    t = np.asarray(target, dtype=float)
    w = np.asarray(weights, dtype=float)
    tbar = float(w @ t / w.sum())
    sst = float(w @ (t - tbar) ** 2)
    sse = float(w @ (t - np.asarray(fitted)) ** 2)
    # a constant target leaves rounding-level SST; treat it as exactly zero
    tol = 1e-20 * max(float(w @ t ** 2), 1e-300)
    if sst <= tol:
        return 1.0 if sse <= tol else -math.inf
    return 1.0 - sse / sst


@dataclass(frozen=True)
class Explanation:
    feature_weights: list[tuple[str, float]]
    intercept: float
    local_fidelity: float
    predicted_prob: float
    full_fidelity: float | None = None

    def to_dict(self) -> dict:
        return {"feature_weights": [{"feature": n, "weight": w} for n, w in self.feature_weights],
                "intercept": self.intercept, "local_fidelity": self.local_fidelity,
                "predicted_prob": self.predicted_prob, "full_fidelity": self.full_fidelity}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def fit_surrogate(Z, target, weights, k_features: int, ridge_lambda: float,
                  names: Sequence[str] | None = None, predicted_prob: float | None = None) -> Explanation:
    Z = np.asarray(Z, dtype=float)
    t = np.asarray(target, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not (len(Z) == len(t) == len(w)):
        raise ValueError("Z, target and weights must have equal length")
    f = Z.shape[1]
    if not 1 <= k_features <= f:
        raise ValueError(f"k_features must be in [1, {f}]")
    names = list(names) if names is not None else [f"x{j}" for j in range(f)]
    coef, b = weighted_ridge(Z, t, w, ridge_lambda)
    full_fit = weighted_r2(t, Z @ coef + b, w)
    top = np.argsort(-np.abs(coef), kind="stable")[:k_features]
    sub, b2 = weighted_ridge(Z[:, top], t, w, ridge_lambda)
    fidelity = weighted_r2(t, Z[:, top] @ sub + b2, w)
    pred = float(t[0]) if predicted_prob is None else float(predicted_prob)
    return Explanation([(names[j], float(c)) for j, c in zip(top, sub)], float(b2), fidelity, pred, full_fit)


def _positive_proba(model, X) -> np.ndarray:
    return np.asarray(model.predict_proba(X))[:, 1]


def explain(model, instance, training, cfg: LimeConfig = LimeConfig(), names: Sequence[str] | None = None,
            kinds: Sequence[str] | None = None) -> Explanation:
    """``training`` is a FeatureMatrix or a plain 2-D array (then ``names``/``kinds`` apply)."""
    if hasattr(training, "values") and hasattr(training, "feature_names"):
        names = list(training.feature_names) if names is None else names
        kinds = list(training.kinds) if kinds is None else kinds
        values = training.values
    else:
        values = np.asarray(training, dtype=float)
    x = np.asarray(instance, dtype=float).ravel()
    f = values.shape[1]
    if len(x) != f:
        raise ArityMismatch(f"instance has {len(x)} features, training matrix has {f}")
    n_model = getattr(model, "feature_count", f)
    if n_model != f:
        raise ArityMismatch(f"model expects {n_model} features, got {f}")
    names = list(names) if names is not None else [f"x{j}" for j in range(f)]
    stats = discretize_stats(values, names, kinds)
    Z, Xp = perturb(x, stats, cfg.n_samples, cfg.seed, cfg.keep_probability)
    target = _positive_proba(model, Xp)
    w = kernel_weights(Z, cfg.width(f))
    return fit_surrogate(Z, target, w, min(cfg.k_features, f), cfg.ridge_lambda, names, float(target[0]))


TOP_FEATURE_COLUMNS = ["row", "rank", "feature", "weight", "intercept", "local_fidelity", "predicted_prob"]


def write_top_features(path, rows: Sequence[int], explanations: Sequence[Explanation]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TOP_FEATURE_COLUMNS)
        for r, e in zip(rows, explanations):
            for rank, (name, weight) in enumerate(e.feature_weights, start=1):
                w.writerow([r, rank, name, repr(weight), repr(e.intercept), repr(e.local_fidelity),
                            repr(e.predicted_prob)])
