"""Table ingestion and preprocessing.

Cells live column-wise: numeric columns are float arrays with NaN as the
missing marker, binary and categorical columns are object arrays of string
tokens with ``None`` as the missing marker. The label column is always
parsed as a number and must be 0/1.

The default preprocessing order is impute -> encode -> remove_outliers ->
filter_correlated -> standardize.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AllRowsDropped,
    ArityMismatch,
    DataError,
    EmptyColumn,
    LabelNotBinary,
    MissingColumn,
    NotEnoughNeighbors,
    UnseenCategory,
    WrongKind,
)

KINDS = ("numeric", "categorical", "binary")
ROLES = ("feature", "label", "ignore")
DEFAULT_MISSING = ("N/A", "")

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    role: str = "feature"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"column {self.name!r}: kind must be one of {KINDS}, got {self.kind!r}")
        if self.role not in ROLES:
            raise ValueError(f"column {self.name!r}: role must be one of {ROLES}, got {self.role!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "role": self.role}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnSpec":
        return cls(name=d["name"], kind=d["kind"], role=d.get("role", "feature"))


def _check_spec(spec: Sequence[ColumnSpec]) -> tuple[ColumnSpec, ...]:
    spec = tuple(spec)
    names = [c.name for c in spec]
    if len(set(names)) != len(names):
        raise ValueError("duplicate column names in spec")
    labels = [c for c in spec if c.role == "label"]
    if len(labels) != 1:
        raise ValueError(f"spec needs exactly one label column, found {len(labels)}")
    return spec


def _token(value) -> str | None:
    """Normalize a raw cell to a category token (None = missing)."""
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return None
        return str(int(value)) if float(value).is_integer() else repr(float(value))
    return str(value)


def _number(value) -> float:
    if value is None:
        return math.nan
    try:
        return float(value)
    except (TypeError, ValueError):
        return math.nan


@dataclass(frozen=True)
class Table:
    """Schema-tagged columns; ``columns[name]`` has one cell per row."""

    spec: tuple[ColumnSpec, ...]
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "spec", _check_spec(self.spec))
        lengths = {len(self.columns[c.name]) for c in self.spec}
        if len(lengths) > 1:
            raise ValueError("all columns must have the same number of cells")

    @classmethod
    def from_rows(cls, spec: Sequence[ColumnSpec], rows: Iterable[Sequence],
                  missing_tokens: Iterable[str] = DEFAULT_MISSING) -> "Table":
        spec = _check_spec(spec)
        rows = [tuple(r) for r in rows]
        for r in rows:
            if len(r) != len(spec):
                raise ValueError(f"row has {len(r)} cells, spec has {len(spec)}")
        missing = set(missing_tokens)
        cols = {}
        for j, c in enumerate(spec):
            raw = [None if (isinstance(r[j], str) and r[j].strip() in missing) else r[j] for r in rows]
            cols[c.name] = _parse_column(c, raw)
        return cls(spec, cols)

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.spec[0].name]) if self.spec else 0

    @property
    def rows(self) -> list[tuple]:
        out = []
        cols = [self.columns[c.name] for c in self.spec]
        for i in range(self.n_rows):
            out.append(tuple(_cell(col[i]) for col in cols))
        return out

    @property
    def label_spec(self) -> ColumnSpec:
        return next(c for c in self.spec if c.role == "label")

    @property
    def feature_specs(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.spec if c.role == "feature")

    def labels(self) -> np.ndarray:
        return self.columns[self.label_spec.name].astype(np.int64)

    def missing_mask(self, name: str) -> np.ndarray:
        col = self.columns[name]
        if col.dtype == object:
            return np.array([v is None for v in col], dtype=bool)
        return np.isnan(col)

    def missing_count(self, name: str | None = None) -> int:
        names = [name] if name is not None else [c.name for c in self.spec]
        return int(sum(self.missing_mask(n).sum() for n in names))

    def take(self, index) -> "Table":
        index = np.asarray(index)
        return Table(self.spec, {k: v[index] for k, v in self.columns.items()})

    def replace(self, **columns) -> "Table":
        cols = dict(self.columns)
        cols.update(columns)
        return Table(self.spec, cols)


def _cell(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _parse_column(c: ColumnSpec, raw: list) -> np.ndarray:
    if c.role == "label":
        values = np.array([_number(v) for v in raw], dtype=float)
        bad = ~np.isin(values, (0.0, 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise LabelNotBinary(f"label column {c.name!r}: row {i} has value {raw[i]!r}, expected 0 or 1")
        return values
    if c.kind == "numeric":
        values = np.array([_number(v) for v in raw], dtype=float)
        bad = [v for v, x in zip(raw, values) if v is not None and math.isnan(x)
               and not (isinstance(v, float) and math.isnan(v))]
        if bad:
            log.warning("column %r: %d unparseable numeric cell(s) treated as missing (e.g. %r)",
                        c.name, len(bad), bad[0])
        return values
    return np.array([_token(v) for v in raw], dtype=object)


def load_csv(path, spec: Sequence[ColumnSpec], missing_tokens: Iterable[str] = DEFAULT_MISSING) -> Table:
    """Read a header-first, comma-separated UTF-8 file into a Table.

    Header order does not matter and columns absent from ``spec`` are
    skipped. Sentinel tokens and unparseable numeric cells become missing.
    """
    spec = _check_spec(spec)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        pos = {h: i for i, h in enumerate(header)}
        for c in spec:
            if c.name not in pos:
                raise MissingColumn(f"{path}: header lacks column {c.name!r}")
        idx = [pos[c.name] for c in spec]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) < len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            rows.append([rec[i].strip() for i in idx])
    return Table.from_rows(spec, rows, missing_tokens)


def class_distribution(table_or_labels) -> dict[int, int]:
    y = table_or_labels.labels() if isinstance(table_or_labels, Table) else np.asarray(table_or_labels)
    return {0: int(np.sum(y == 0)), 1: int(np.sum(y == 1))}


# ---------------------------------------------------------------- imputation

_NUMERIC_STRATEGIES = ("mean", "median", "knn")
_CATEGORICAL_STRATEGIES = ("mode",)


def _target_columns(table: Table, strategy: str, columns) -> list[ColumnSpec]:
    if strategy in _NUMERIC_STRATEGIES:
        ok = ("numeric",)
    elif strategy in _CATEGORICAL_STRATEGIES:
        ok = ("categorical", "binary")
    else:
        raise ValueError(f"unknown imputation strategy {strategy!r}")
    by_name = {c.name: c for c in table.spec}
    if columns is None:
        return [c for c in table.feature_specs if c.kind in ok]
    out = []
    for name in columns:
        if name not in by_name:
            raise MissingColumn(f"no column {name!r}")
        c = by_name[name]
        if c.kind not in ok or c.role == "label":
            raise WrongKind(f"strategy {strategy!r} does not apply to {c.kind} column {name!r}")
        out.append(c)
    return out


def _mode(tokens) -> str:
    counts = Counter(tokens)
    top = max(counts.values())
    return min(t for t, n in counts.items() if n == top)


def fit_fill_values(table: Table, strategy: str, columns=None) -> dict:
    """Per-column fill values for mean / median / mode imputation."""
    if strategy == "knn":
        raise ValueError("knn imputation has no per-column fill value")
    fills = {}
    for c in _target_columns(table, strategy, columns):
        col = table.columns[c.name]
        observed = col[~table.missing_mask(c.name)]
        if len(observed) == 0:
            raise EmptyColumn(f"column {c.name!r} has no observed values")
        if strategy == "mean":
            fills[c.name] = float(np.mean(observed))
        elif strategy == "median":
            fills[c.name] = float(np.median(observed))
        else:
            fills[c.name] = _mode(observed.tolist())
    return fills


def apply_fill_values(table: Table, fills: Mapping) -> Table:
    cols = {}
    for name, value in fills.items():
        col = table.columns[name].copy()
        col[table.missing_mask(name)] = value
        cols[name] = col
    return table.replace(**cols)


def knn_fill(values: np.ndarray, reference: np.ndarray, k: int) -> np.ndarray:
    """Fill NaNs in ``values`` from the ``k`` nearest rows of ``reference``.

    Distance is Euclidean over coordinates observed in the query row, scaled
    by (total / observed) coordinates. Ties go to the lower reference index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(reference) < k:
        raise NotEnoughNeighbors(f"need {k} complete rows, have {len(reference)}")
    out = values.copy()
    p = values.shape[1]
    for i in np.flatnonzero(np.isnan(values).any(axis=1)):
        obs = ~np.isnan(values[i])
        n_obs = int(obs.sum())
        if n_obs:
            d2 = ((reference[:, obs] - values[i, obs]) ** 2).sum(axis=1) * (p / n_obs)
        else:
            d2 = np.zeros(len(reference))
        nearest = np.argsort(d2, kind="stable")[:k]
        fill = reference[nearest].mean(axis=0)
        out[i, ~obs] = fill[~obs]
    return out


def impute(table: Table, strategy: str, k: int = 5, columns=None) -> Table:
    """Fill missing cells of the columns ``strategy`` applies to.

    mean/median/knn act on numeric feature columns, mode on categorical and
    binary ones. Naming a column of the wrong kind raises WrongKind.
    """
    targets = _target_columns(table, strategy, columns)
    if not targets:
        return table
    if strategy != "knn":
        return apply_fill_values(table, fit_fill_values(table, strategy, [c.name for c in targets]))
    names = [c.name for c in targets]
    values = np.column_stack([table.columns[n] for n in names])
    complete = values[~np.isnan(values).any(axis=1)]
    filled = knn_fill(values, complete, k)
    return table.replace(**{n: filled[:, j] for j, n in enumerate(names)})


def impute_all(table: Table, numeric: str = "median", categorical: str = "mode", k: int = 5) -> Table:
    """Numeric strategy on numeric columns, then mode on the rest."""
    return impute(impute(table, numeric, k=k), categorical)


# ---------------------------------------------------------------- encoding

@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]
    kinds: tuple[str, ...] | None = None  # per feature: numeric / binary / onehot

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if v.shape[1] != len(self.feature_names):
            raise ValueError(f"{v.shape[1]} columns but {len(self.feature_names)} feature names")
        if self.kinds is not None and len(self.kinds) != v.shape[1]:
            raise ValueError("kinds length must equal column count")
        if not np.isfinite(v).all():
            raise DataError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.kinds is not None:
            object.__setattr__(self, "kinds", tuple(self.kinds))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def numeric_columns(self) -> np.ndarray:
        if self.kinds is None:
            return np.arange(self.values.shape[1])
        return np.array([j for j, k in enumerate(self.kinds) if k == "numeric"], dtype=int)

    def take_rows(self, index) -> "FeatureMatrix":
        return FeatureMatrix(self.values[np.asarray(index)], self.feature_names, self.kinds)

    def take_columns(self, index) -> "FeatureMatrix":
        index = list(index)
        kinds = None if self.kinds is None else [self.kinds[j] for j in index]
        return FeatureMatrix(self.values[:, index], [self.feature_names[j] for j in index], kinds)


def _binary_vocab(tokens: set) -> list[str]:
    if tokens <= {"0", "1"}:
        return ["0", "1"]
    if len(tokens) > 2:
        raise WrongKind(f"binary column has {len(tokens)} distinct tokens: {sorted(tokens)}")
    return sorted(tokens)


def build_vocabulary(table: Table) -> dict[str, list[str]]:
    vocab = {}
    for c in table.feature_specs:
        if c.kind == "numeric":
            continue
        tokens = {t for t in table.columns[c.name] if t is not None}
        vocab[c.name] = _binary_vocab(tokens) if c.kind == "binary" else sorted(tokens)
    return vocab


def encode(table: Table, vocabulary: Mapping[str, Sequence[str]] | None = None) -> FeatureMatrix:
    """Numeric pass-through, binary to 0/1, categorical one-hot ("col=token").

    With a frozen ``vocabulary`` any token outside it raises UnseenCategory.
    """
    frozen = vocabulary is not None
    vocab = build_vocabulary(table) if vocabulary is None else vocabulary
    blocks, names, kinds = [], [], []
    n = table.n_rows
    for c in table.feature_specs:
        col = table.columns[c.name]
        if table.missing_count(c.name):
            raise DataError(f"column {c.name!r} still has missing cells; impute first")
        if c.kind == "numeric":
            blocks.append(col.astype(float).reshape(n, 1))
            names.append(c.name)
            kinds.append("numeric")
            continue
        tokens = list(vocab[c.name])
        pos = {t: i for i, t in enumerate(tokens)}
        try:
            codes = np.array([pos[t] for t in col], dtype=int)
        except KeyError as exc:
            if frozen:
                raise UnseenCategory(f"column {c.name!r}: token {exc.args[0]!r} not in {tokens}") from None
            raise
        if c.kind == "binary":
            blocks.append(codes.astype(float).reshape(n, 1))
            names.append(c.name)
            kinds.append("binary")
        else:
            onehot = np.zeros((n, len(tokens)))
            onehot[np.arange(n), codes] = 1.0
            blocks.append(onehot)
            names.extend(f"{c.name}={t}" for t in tokens)
            kinds.extend(["onehot"] * len(tokens))
    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return FeatureMatrix(values, names, kinds)


# ---------------------------------------------------------------- scaling

@dataclass(frozen=True)
class ScalerStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        std = np.asarray(self.std, dtype=float).copy()
        std[std == 0] = 1.0
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "std", std)

    @classmethod
    def fit(cls, values: np.ndarray) -> "ScalerStats":
        return cls(values.mean(axis=0), values.std(axis=0))

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != len(self.mean):
            raise ArityMismatch(f"scaler fitted on {len(self.mean)} features, got {values.shape[-1]}")
        return (values - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalerStats":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


def standardize(m: FeatureMatrix, stats: ScalerStats | None = None) -> tuple[FeatureMatrix, ScalerStats]:
    if stats is None:
        stats = ScalerStats.fit(m.values)
    return FeatureMatrix(stats.transform(m.values), m.feature_names, m.kinds), stats


# ---------------------------------------------------------------- feature engineering

def outlier_mask(values: np.ndarray, iqr_k: float = 1.5, columns=None) -> np.ndarray:
    """True for rows inside [Q1 - k*IQR, Q3 + k*IQR] on every checked column."""
    if not iqr_k > 0:
        raise ValueError("iqr_k must be > 0")
    cols = np.arange(values.shape[1]) if columns is None else np.asarray(columns, dtype=int)
    keep = np.ones(len(values), dtype=bool)
    if len(cols) == 0 or len(values) == 0:
        return keep
    sub = values[:, cols]
    q1, q3 = np.percentile(sub, [25, 75], axis=0)
    iqr = q3 - q1
    keep &= ((sub >= q1 - iqr_k * iqr) & (sub <= q3 + iqr_k * iqr)).all(axis=1)
    return keep


def remove_outliers(m: FeatureMatrix, labels, iqr_k: float = 1.5) -> tuple[FeatureMatrix, np.ndarray]:
    labels = np.asarray(labels)
    keep = outlier_mask(m.values, iqr_k, m.numeric_columns())
    if not keep.any():
        raise AllRowsDropped(f"iqr_k={iqr_k} drops every row")
    return m.take_rows(np.flatnonzero(keep)), labels[keep]


def correlated_columns(values: np.ndarray, threshold: float) -> list[int]:
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    f = values.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.corrcoef(values, rowvar=False) if f > 1 else np.ones((1, 1))
    r = np.clip(np.nan_to_num(np.atleast_2d(r), nan=0.0), -1.0, 1.0)
    kept = np.ones(f, dtype=bool)
    for i in range(f):
        if not kept[i]:
            continue
        for j in range(i + 1, f):
            if kept[j] and abs(r[i, j]) > threshold:
                kept[j] = False
    return np.flatnonzero(kept).tolist()


def filter_correlated(m: FeatureMatrix, threshold: float) -> tuple[FeatureMatrix, list[int]]:
    """Drop the later column of every pair with |pearson r| above threshold."""
    kept = correlated_columns(m.values, threshold)
    return m.take_columns(kept), kept


# ---------------------------------------------------------------- predict-time state

@dataclass
class Preprocessor:
    """Frozen preprocessing state needed to turn a raw table into model input."""

    columns: list[ColumnSpec]
    missing_tokens: list[str]
    numeric_strategy: str
    categorical_strategy: str
    knn_k: int
    fills: dict
    knn_columns: list[str]
    knn_reference: np.ndarray | None
    vocabulary: dict[str, list[str]]
    encoded_names: list[str]
    kept: list[int]
    scaler: ScalerStats | None = None
    feature_kinds: list[str] = field(default_factory=list)

    @property
    def feature_names(self) -> list[str]:
        return [self.encoded_names[j] for j in self.kept]

    @classmethod
    def fit(cls, table: Table, numeric_strategy="median", categorical_strategy="mode",
            knn_k=5, missing_tokens=DEFAULT_MISSING) -> "Preprocessor":
        fills = {}
        knn_columns, knn_reference = [], None
        if numeric_strategy == "knn":
            knn_columns = [c.name for c in _target_columns(table, "knn", None)]
            if knn_columns:
                vals = np.column_stack([table.columns[n] for n in knn_columns])
                knn_reference = vals[~np.isnan(vals).any(axis=1)]
        else:
            fills.update(fit_fill_values(table, numeric_strategy))
        fills.update(fit_fill_values(table, categorical_strategy))
        return cls(
            columns=list(table.spec), missing_tokens=list(missing_tokens),
            numeric_strategy=numeric_strategy, categorical_strategy=categorical_strategy,
            knn_k=knn_k, fills=fills, knn_columns=knn_columns, knn_reference=knn_reference,
            vocabulary={}, encoded_names=[], kept=[],
        )

    def impute(self, table: Table) -> Table:
        out = apply_fill_values(table, self.fills)
        if self.knn_columns:
            vals = np.column_stack([out.columns[n] for n in self.knn_columns])
            filled = knn_fill(vals, self.knn_reference, self.knn_k)
            out = out.replace(**{n: filled[:, j] for j, n in enumerate(self.knn_columns)})
        return out

    def encode(self, table: Table) -> FeatureMatrix:
        m = encode(table, self.vocabulary)
        if list(m.feature_names) != list(self.encoded_names):
            raise ArityMismatch("encoded feature names differ from training")
        return m.take_columns(self.kept)

    def transform(self, table: Table) -> FeatureMatrix:
        m = self.encode(self.impute(table))
        if self.scaler is not None:
            m, _ = standardize(m, self.scaler)
        return m

    def to_dict(self) -> dict:
        return {
            "columns": [c.to_dict() for c in self.columns],
            "missing_tokens": list(self.missing_tokens),
            "numeric_strategy": self.numeric_strategy,
            "categorical_strategy": self.categorical_strategy,
            "knn_k": self.knn_k,
            "fills": dict(self.fills),
            "knn_columns": list(self.knn_columns),
            "knn_reference": None if self.knn_reference is None else self.knn_reference.tolist(),
            "vocabulary": {k: list(v) for k, v in self.vocabulary.items()},
            "encoded_names": list(self.encoded_names),
            "kept": list(self.kept),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "feature_kinds": list(self.feature_kinds),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Preprocessor":
        ref = d.get("knn_reference")
        return cls(
            columns=[ColumnSpec.from_dict(c) for c in d["columns"]],
            missing_tokens=list(d["missing_tokens"]),
            numeric_strategy=d["numeric_strategy"],
            categorical_strategy=d["categorical_strategy"],
            knn_k=int(d["knn_k"]),
            fills=dict(d["fills"]),
            knn_columns=list(d["knn_columns"]),
            knn_reference=None if ref is None else np.array(ref, dtype=float).reshape(-1, len(d["knn_columns"])),
            vocabulary={k: list(v) for k, v in d["vocabulary"].items()},
            encoded_names=list(d["encoded_names"]),
            kept=[int(j) for j in d["kept"]],
            scaler=None if d.get("scaler") is None else ScalerStats.from_dict(d["scaler"]),
            feature_kinds=list(d.get("feature_kinds", [])),
        )
