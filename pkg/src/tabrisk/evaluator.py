"""Metrics, stratified folds and exhaustive grid search.

Grid search picks the cell maximizing mean held-out-fold F1; ties go to the
lowest cell index, with cells enumerated row-major over the grid's axis
order.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ConstantTruth, LengthMismatch, SingleClass, TooFewPerClass
from .learners import fit_family, normalize_params, predict_proba
from .rng import derive_seed, stream

POSITIVE_THRESHOLD = 0.5


@dataclass(frozen=True)
class MetricSet:
    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    auc: float | None = None
    mae: float | None = None
    mse: float | None = None
    rmse: float | None = None
    r2: float | None = None

    def merged(self, other: "MetricSet") -> "MetricSet":
        vals = {k: v for k, v in vars(other).items() if v is not None}
        return MetricSet(**{**vars(self), **vals})

    def as_dict(self) -> dict:
        return {k: v for k, v in vars(self).items() if v is not None}


def _binary(v, name):
    v = np.asarray(v)
    if not np.isin(v, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1")
    return v.astype(np.int64)


def confusion_counts(y_true, y_pred) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) with class 1 positive."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise LengthMismatch("empty input")
    t = _binary(y_true, "y_true")
    p = _binary(y_pred, "y_pred")
    tp = int(np.sum((t == 1) & (p == 1)))
    fp = int(np.sum((t == 0) & (p == 1)))
    fn = int(np.sum((t == 1) & (p == 0)))
    tn = int(np.sum((t == 0) & (p == 0)))
    return tp, fp, fn, tn


def confusion_metrics(y_true, y_pred) -> MetricSet:
    tp, fp, fn, tn = confusion_counts(y_true, y_pred)
    n = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return MetricSet(accuracy=(tp + tn) / n, precision=precision, recall=recall, f1=f1)


def f1_score(y_true, y_pred) -> float:
    return confusion_metrics(y_true, y_pred).f1


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney AUC; tied (positive, negative) pairs count one half."""
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=float)
    if len(y) != len(s):
        raise LengthMismatch(f"{len(y)} labels vs {len(s)} scores")
    pos = y == 1
    n1 = int(pos.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise SingleClass("AUC needs both classes")
    ranks = rankdata(s, method="average")
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def error_metrics(y_true, p) -> MetricSet:
    y = np.asarray(y_true, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(y) != len(p):
        raise LengthMismatch(f"{len(y)} labels vs {len(p)} probabilities")
    if len(y) == 0:
        raise LengthMismatch("empty input")
    if ((p < 0) | (p > 1)).any():
        raise ValueError("probabilities must lie in [0, 1]")
    resid = y - p
    mse = float(np.mean(resid ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise ConstantTruth("R^2 is undefined when y_true is constant")
    return MetricSet(mae=float(np.mean(np.abs(resid))), mse=mse, rmse=math.sqrt(mse),
                     r2=1.0 - float(np.sum(resid ** 2)) / sst)


def classification_report(y_true, p, threshold=POSITIVE_THRESHOLD) -> MetricSet:
    """Confusion metrics at ``threshold`` plus AUC (when both classes occur)."""
    p = np.asarray(p, dtype=float)
    m = confusion_metrics(y_true, (p >= threshold).astype(int))
    y = np.asarray(y_true)
    if 0 < y.sum() < len(y):
        m = m.merged(MetricSet(auc=roc_auc(y, p)))
    return m


# ---------------------------------------------------------------- folds

@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple[np.ndarray, ...]
    seed: int

    def test_indices(self, i: int) -> np.ndarray:
        return self.folds[i]

    def train_indices(self, i: int) -> np.ndarray:
        return np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))

    def assignment(self) -> np.ndarray:
        n = sum(len(f) for f in self.folds)
        out = np.empty(n, dtype=np.int64)
        for i, f in enumerate(self.folds):
            out[f] = i
        return out


def stratified_kfold(y, k: int, seed: int) -> FoldPlan:
    """Shuffle each class, then deal its rows round-robin over the folds.

    Dealing continues where the previous class stopped, so fold sizes stay
    within one of each other as well.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = stream(seed, "folds")
    buckets = [[] for _ in range(k)]
    start = 0
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            raise TooFewPerClass(f"class {c} has {len(idx)} rows, fewer than k={k}")
        idx = idx[rng.permutation(len(idx))]
        for pos, i in enumerate(idx):
            buckets[(start + pos) % k].append(i)
        start = (start + len(idx)) % k
    folds = tuple(np.sort(np.array(b, dtype=np.int64)) for b in buckets)
    return FoldPlan(k, folds, seed)


def stratified_holdout(y, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) index arrays; each class contributes round(fraction * n_c) test rows."""
    y = np.asarray(y)
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    rng = stream(seed, "holdout")
    test = []
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(math.floor(fraction * len(idx) + 0.5))
        if len(idx) and not 0 < n_test < len(idx):
            raise TooFewPerClass(f"class {c} has {len(idx)} rows; cannot hold out {fraction:.0%}")
        test.append(idx[:n_test])
    test = np.sort(np.concatenate(test))
    mask = np.ones(len(y), dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test


# ---------------------------------------------------------------- grid search

def expand_grid(grid: Mapping[str, Sequence]) -> list[dict]:
    """Cartesian product in row-major order over the mapping's key order."""
    keys = list(grid)
    for k in keys:
        if len(grid[k]) == 0:
            raise ValueError(f"grid axis {k!r} is empty")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def fold_seed(seed: int, family: str, fold: int | str) -> int:
    """Model seed used for ``family`` when training on fold ``fold`` ("full" = refit)."""
    return derive_seed(seed, f"model/{family}/fold{fold}")


@dataclass
class TuneReport:
    family: str
    grid: list[dict]
    fold_f1: list[list[float]]
    mean_f1: list[float]
    best_index: int
    k: int
    oof_proba: np.ndarray | None = field(default=None, repr=False)

    @property
    def best_params(self) -> dict:
        return dict(self.grid[self.best_index])

    @property
    def best_score(self) -> float:
        return self.mean_f1[self.best_index]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["family", "cell", "params", "fold", "f1"])
            for c, params in enumerate(self.grid):
                for i, v in enumerate(self.fold_f1[c]):
                    w.writerow([self.family, c, json.dumps(params, sort_keys=True), i, repr(v)])

    def summary(self) -> dict:
        return {"family": self.family, "k": self.k, "n_cells": len(self.grid),
                "best_index": self.best_index, "best_params": self.best_params,
                "best_mean_f1": self.best_score, "mean_f1": list(self.mean_f1)}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


Balancer = Callable[[np.ndarray, np.ndarray, str], tuple[np.ndarray, np.ndarray]]


def _fit_score(family, params, seed, Xtr, ytr, Xte, yte):
    model = fit_family(family, Xtr, ytr, params, seed)
    p = predict_proba(model, Xte)[:, 1]
    return f1_score(yte, (p >= POSITIVE_THRESHOLD).astype(int)), p


def grid_search(family: str, grid: Mapping[str, Sequence], X, y, k: int = 5, seed: int = 0,
                folds: FoldPlan | None = None, balancer: Balancer | None = None,
                on_fit: Callable | None = None, n_jobs: int = 1) -> TuneReport:
    """Score every grid cell by k-fold held-out F1.

    ``balancer(X_train, y_train, tag)`` rebalances each fold's training side
    once (tag "fold<i>"); held-out folds are never touched. ``on_fit(family,
    fold, train_rows)`` is an audit hook. With ``n_jobs > 1`` the cell x fold
    fits run in worker processes; results are assembled in cell order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    normalize_params(family, {key: None for key in grid})
    cells = expand_grid(grid)
    if folds is None:
        folds = stratified_kfold(y, k, seed)
    k = folds.k

    train = []
    for i in range(k):
        tr = folds.train_indices(i)
        if on_fit is not None:
            on_fit(family, i, tr)
        Xtr, ytr = X[tr], y[tr]
        if balancer is not None:
            Xtr, ytr = balancer(Xtr, ytr, f"fold{i}")
        train.append((Xtr, ytr))

    tasks = [(c, i) for c in range(len(cells)) for i in range(k)]

    def job(c, i):
        te = folds.test_indices(i)
        return _fit_score(family, cells[c], fold_seed(seed, family, i), *train[i], X[te], y[te])

    if n_jobs == 1:
        results = [job(c, i) for c, i in tasks]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(_fit_score)(family, cells[c], fold_seed(seed, family, i), *train[i],
                                X[folds.test_indices(i)], y[folds.test_indices(i)])
            for c, i in tasks)

    fold_f1 = [[0.0] * k for _ in cells]
    oof = np.full((len(cells), len(y)), np.nan)
    for (c, i), (score, p) in zip(tasks, results):
        fold_f1[c][i] = score
        oof[c, folds.test_indices(i)] = p
    means = [float(np.mean(s)) for s in fold_f1]
    best = int(np.argmax(means))  # first maximal cell
    return TuneReport(family, cells, fold_f1, means, best, k, oof[best])
