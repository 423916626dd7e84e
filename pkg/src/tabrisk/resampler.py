"""Minority oversampling to a 1:1 class ratio: ROS, SMOTE, Borderline-SMOTE-1, ADASYN.

All samplers keep the original rows, unmodified and in order, as a prefix of
the output and append synthetic rows after them. Neighbor ties are broken by
the lower row index, and every draw comes from ``PCG64(seed)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AllSafe, EmptyDangerSet, SingleClass, TooFewMinority
from .rng import check_seed

METHODS = ("ros", "smote", "bsmote", "adasyn")
_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class ResampleConfig:
    method: str = "ros"
    k_neighbors: int = 5
    m_neighbors: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.method == "bsmote" and self.m_neighbors < self.k_neighbors:
            raise ValueError("m_neighbors must be >= k_neighbors for bsmote")
        check_seed(self.seed)


@dataclass(frozen=True)
class Provenance:
    """One entry per synthetic row.

    ``neighbor`` is -1 and ``coef`` is 0 for ROS duplicates; otherwise the
    synthetic row equals ``X[parent] + coef * (X[neighbor] - X[parent])``.
    """

    parent: np.ndarray
    neighbor: np.ndarray
    coef: np.ndarray

    def __len__(self):
        return len(self.parent)

    @classmethod
    def empty(cls) -> "Provenance":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))


@dataclass(frozen=True)
class ResampleResult:
    features: np.ndarray
    labels: np.ndarray
    synthetic_count: int
    provenance: Provenance
    method: str = "ros"

    @property
    def n_original(self) -> int:
        return len(self.labels) - self.synthetic_count

    def write_provenance(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "parent", "neighbor", "coef"])
            for i in range(self.synthetic_count):
                w.writerow([self.n_original + i, int(self.provenance.parent[i]),
                            int(self.provenance.neighbor[i]), repr(float(self.provenance.coef[i]))])


def _classes(X: np.ndarray, y: np.ndarray):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    n1 = int(np.sum(y == 1))
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        raise SingleClass("both classes must be present")
    minority = 1 if n1 < n0 else 0
    return X, y, minority, abs(n0 - n1)


def _unchanged(X, y, method) -> ResampleResult:
    return ResampleResult(X.copy(), y.copy(), 0, Provenance.empty(), method)


def _assemble(X, y, minority, parent, neighbor, coef, synth, method) -> ResampleResult:
    labels = np.concatenate([y, np.full(len(parent), minority, dtype=y.dtype)])
    features = np.vstack([X, synth]) if len(parent) else X.copy()
    prov = Provenance(np.asarray(parent, dtype=np.int64), np.asarray(neighbor, dtype=np.int64),
                      np.asarray(coef, dtype=float))
    return ResampleResult(features, labels, len(parent), prov, method)


def nearest_neighbors(points: np.ndarray, queries: np.ndarray, k: int, exclude: np.ndarray | None = None) -> np.ndarray:
    """Indices into ``points`` of the k nearest to each query (stable on ties).

    ``exclude[i]`` is an index of ``points`` not allowed as neighbor of query i
    (the query itself when querying a set against itself).
    """
    out = np.empty((len(queries), k), dtype=np.int64)
    step = max(1, _CHUNK_CELLS // max(1, len(points) * points.shape[1]))
    for lo in range(0, len(queries), step):
        q = queries[lo:lo + step]
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        if exclude is not None:
            d2[np.arange(len(q)), exclude[lo:lo + step]] = np.inf
        out[lo:lo + step] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def random_oversample(X, y, seed: int = 0) -> ResampleResult:
    X, y, minority, need = _classes(X, y)
    if need == 0:
        return _unchanged(X, y, "ros")
    rng = np.random.Generator(np.random.PCG64(check_seed(seed)))
    pool = np.flatnonzero(y == minority)
    parent = pool[rng.integers(0, len(pool), size=need)]
    return _assemble(X, y, minority, parent, np.full(need, -1), np.zeros(need), X[parent], "ros")


def _minority_setup(X, y, cfg: ResampleConfig):
    X, y, minority, need = _classes(X, y)
    pool = np.flatnonzero(y == minority)
    if need and (len(pool) < 2 or cfg.k_neighbors > len(pool) - 1):
        raise TooFewMinority(
            f"{len(pool)} minority rows cannot supply k_neighbors={cfg.k_neighbors} neighbors")
    return X, y, minority, need, pool


def _interpolate(X, pool, parents_local, minority_nn, rng):
    """SMOTE step for a sequence of parents (positions within ``pool``)."""
    k = minority_nn.shape[1]
    pick = rng.integers(0, k, size=len(parents_local))
    u = rng.random(len(parents_local))
    nb_local = minority_nn[parents_local, pick]
    parent = pool[parents_local]
    neighbor = pool[nb_local]
    synth = X[parent] + u[:, None] * (X[neighbor] - X[parent])
    return parent, neighbor, u, synth


def _minority_neighbors(X, pool, k):
    P = X[pool]
    return nearest_neighbors(P, P, k, exclude=np.arange(len(pool)))


def smote(X, y, cfg: ResampleConfig) -> ResampleResult:
    """Parents taken round-robin over the minority rows in index order."""
    X, y, minority, need, pool = _minority_setup(X, y, cfg)
    if need == 0:
        return _unchanged(X, y, "smote")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    nn = _minority_neighbors(X, pool, cfg.k_neighbors)
    order = np.arange(need) % len(pool)
    parent, neighbor, u, synth = _interpolate(X, pool, order, nn, rng)
    return _assemble(X, y, minority, parent, neighbor, u, synth, "smote")


def danger_set(X, y, minority: int, m_neighbors: int) -> tuple[np.ndarray, np.ndarray]:
    """(danger, noise) minority row indices under the Borderline-SMOTE rule."""
    pool = np.flatnonzero(y == minority)
    m = min(m_neighbors, len(y) - 1)
    nn = nearest_neighbors(X, X[pool], m, exclude=pool)
    n_major = (y[nn] != minority).sum(axis=1)
    danger = pool[(n_major >= m / 2) & (n_major < m)]
    noise = pool[n_major == m]
    return danger, noise


def borderline_smote(X, y, cfg: ResampleConfig) -> ResampleResult:
    X, y, minority, need, pool = _minority_setup(X, y, cfg)
    if need == 0:
        return _unchanged(X, y, "bsmote")
    if cfg.m_neighbors > len(y) - 1:
        raise ValueError(f"m_neighbors={cfg.m_neighbors} exceeds the {len(y) - 1} available neighbors")
    danger, _ = danger_set(X, y, minority, cfg.m_neighbors)
    if len(danger) == 0:
        raise EmptyDangerSet("no minority row lies on the class border")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    nn = _minority_neighbors(X, pool, cfg.k_neighbors)
    local = np.searchsorted(pool, danger)
    order = local[np.arange(need) % len(local)]
    parent, neighbor, u, synth = _interpolate(X, pool, order, nn, rng)
    return _assemble(X, y, minority, parent, neighbor, u, synth, "bsmote")


def adasyn_quotas(X, y, minority: int, k: int, target: int) -> np.ndarray:
    """Synthetic count per minority row, round-half-up of r_hat_i * target."""
    pool = np.flatnonzero(y == minority)
    nn = nearest_neighbors(X, X[pool], k, exclude=pool)
    r = (y[nn] != minority).sum(axis=1) / k
    total = r.sum()
    if total == 0:
        raise AllSafe("no minority row has a majority neighbor")
    return np.floor(r / total * target + 0.5).astype(np.int64)


def adasyn(X, y, cfg: ResampleConfig) -> ResampleResult:
    X, y, minority, need, pool = _minority_setup(X, y, cfg)
    if need == 0:
        return _unchanged(X, y, "adasyn")
    quotas = adasyn_quotas(X, y, minority, cfg.k_neighbors, need)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    nn = _minority_neighbors(X, pool, cfg.k_neighbors)
    order = np.repeat(np.arange(len(pool)), quotas)
    parent, neighbor, u, synth = _interpolate(X, pool, order, nn, rng)
    return _assemble(X, y, minority, parent, neighbor, u, synth, "adasyn")


def resample(X, y, cfg: ResampleConfig) -> ResampleResult:
    if cfg.method == "ros":
        return random_oversample(X, y, cfg.seed)
    return {"smote": smote, "bsmote": borderline_smote, "adasyn": adasyn}[cfg.method](X, y, cfg)


def class_gap(result: ResampleResult) -> int:
    n1 = int(np.sum(result.labels == 1))
    return abs(len(result.labels) - 2 * n1)


def expected_gap_bound(y) -> int:
    """ADASYN rounding can leave at most one row per minority point unmatched."""
    y = np.asarray(y)
    return int(min(np.sum(y == 0), np.sum(y == 1)))


__all__ = [
    "METHODS", "ResampleConfig", "ResampleResult", "Provenance", "random_oversample", "smote",
    "borderline_smote", "adasyn", "resample", "danger_set", "adasyn_quotas", "nearest_neighbors",
    "class_gap", "expected_gap_bound",
]
