"""Run configuration: a JSON document validated into ``RunConfig``.

Schema (all sections optional except ``dataset`` and ``seed``)::

    {
      "dataset": {"path": "data.csv", "missing_tokens": ["N/A", ""],
                  "columns": [{"name": "age", "kind": "numeric"},
                              {"name": "stroke", "kind": "binary", "role": "label"}]},
      "preprocessing": {"numeric_imputation": "median", "categorical_imputation": "mode",
                        "knn_k": 5, "iqr_k": 1.5, "correlation_threshold": 0.9},
      "balancing": {"method": "ros", "k_neighbors": 5, "m_neighbors": 10},
      "mode": "strict",
      "models": {"rf": "default", "xgb": {"n_estimators": [100], "max_depth": [3]}},
      "ensemble": ["rf", "et", "xgb"], "ensemble_weighting": "rank",
      "cv_k": 5, "test_fraction": 0.2, "n_jobs": 1, "seed": 42, "output_dir": "out",
      "explain": {"rows": [0, 1, 2], "n_samples": 5000, "k_features": 5,
                  "kernel_width": null, "ridge_lambda": 1.0}
    }

``"default"`` selects the built-in tuning grid for that family. ``iqr_k`` or
``correlation_threshold`` set to null disables that step. Relative paths
resolve against the config file's directory. A grid may also be given as
``[[axis, values], ...]``; axis order fixes the row-major cell order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from ..data import DEFAULT_MISSING, ColumnSpec
from ..errors import ConfigError, InvalidParamForFamily
from ..learners import DEFAULT_GRIDS, normalize_params
from ..resampler import METHODS
from ..rng import check_seed

MODES = ("strict", "leaky")
BALANCING = ("none",) + METHODS
NUMERIC_IMPUTATION = ("median", "mean", "knn")
CATEGORICAL_IMPUTATION = ("mode",)
DEFAULT_ENSEMBLE = ("rf", "et", "xgb")
WEIGHTINGS = ("rank", "uniform")

_TOP_KEYS = {"dataset", "preprocessing", "balancing", "mode", "models", "ensemble", "ensemble_weighting", "cv_k",
             "test_fraction", "n_jobs", "seed", "output_dir", "explain"}


@dataclass(frozen=True)
class Preprocessing:
    numeric_imputation: str = "median"
    categorical_imputation: str = "mode"
    knn_k: int = 5
    iqr_k: float | None = 1.5
    correlation_threshold: float | None = None


@dataclass(frozen=True)
class Balancing:
    method: str = "ros"
    k_neighbors: int = 5
    m_neighbors: int = 10


@dataclass(frozen=True)
class ExplainSettings:
    rows: tuple[int, ...] = (0,)
    n_samples: int = 5000
    k_features: int = 5
    kernel_width: float | None = None
    ridge_lambda: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str
    columns: tuple[ColumnSpec, ...]
    seed: int
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING
    preprocessing: Preprocessing = Preprocessing()
    balancing: Balancing = Balancing()
    mode: str = "strict"
    models: dict = field(default_factory=dict)
    ensemble: tuple[str, ...] = DEFAULT_ENSEMBLE
    ensemble_weighting: str = "rank"
    cv_k: int = 5
    test_fraction: float = 0.2
    n_jobs: int = 1
    output_dir: str = "out"
    explain: ExplainSettings = ExplainSettings()

    def with_overrides(self, seed=None, mode=None, output_dir=None) -> "RunConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = check_seed(seed)
        if mode is not None:
            if mode not in MODES:
                raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
            changes["mode"] = mode
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        return replace(self, **changes)

    def with_balancing(self, method: str) -> "RunConfig":
        return replace(self, balancing=replace(self.balancing, method=method))

    def to_dict(self) -> dict:
        return {
            "dataset": {"path": self.dataset_path, "missing_tokens": list(self.missing_tokens),
                        "columns": [c.to_dict() for c in self.columns]},
            "preprocessing": asdict(self.preprocessing),
            "balancing": asdict(self.balancing),
            "mode": self.mode,
            "models": {k: [[a, list(v)] for a, v in g.items()] for k, g in self.models.items()},
            "ensemble": list(self.ensemble),
            "ensemble_weighting": self.ensemble_weighting,
            "cv_k": self.cv_k,
            "test_fraction": self.test_fraction,
            "n_jobs": self.n_jobs,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "explain": {**asdict(self.explain), "rows": list(self.explain.rows)},
        }

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of the resolved config, output_dir and n_jobs excluded."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("n_jobs")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _section(d: Mapping, key: str, where: str) -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"{where}: '{key}' must be an object")
    return v


def _pick(section: Mapping, allowed: set, where: str) -> None:
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")


def _choice(value, options, where):
    if value not in options:
        raise ConfigError(f"{where}: expected one of {list(options)}, got {value!r}")
    return value


def _int(value, where, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{where}: must be >= {lo}, got {value}")
    return value


def _real(value, where, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _grid(family: str, spec, where: str) -> dict:
    if spec == "default":
        if family not in DEFAULT_GRIDS:
            raise ConfigError(f"{where}: no built-in grid for {family!r}")
        return {k: list(v) for k, v in DEFAULT_GRIDS[family].items()}
    # [[axis, values], ...] is the order-preserving form written into reports
    if isinstance(spec, list) and all(isinstance(p, list) and len(p) == 2 and isinstance(p[0], str) for p in spec):
        if len({p[0] for p in spec}) != len(spec):
            raise ConfigError(f"{where}: repeated grid axis")
        spec = dict((p[0], p[1]) for p in spec)
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: grid must be \"default\", an object of value lists, or [axis, values] pairs")
    try:
        normalize_params(family, {k: None for k in spec})
    except InvalidParamForFamily as exc:
        raise InvalidParamForFamily(f"{where}: {exc}") from None
    grid = {}
    for k, v in spec.items():
        vals = v if isinstance(v, list) else [v]
        if not vals:
            raise ConfigError(f"{where}.{k}: value list is empty")
        grid[k] = vals
    return grid


def parse_config(d: Mapping, base_dir: Path | str = ".", source: str = "<config>") -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: top level must be an object")
    _pick(d, _TOP_KEYS, source)
    base_dir = Path(base_dir)

    ds = _section(d, "dataset", source)
    _pick(ds, {"path", "columns", "missing_tokens"}, f"{source}: dataset")
    if "path" not in ds:
        raise ConfigError(f"{source}: dataset.path is required")
    path = Path(ds["path"])
    if not path.is_absolute():
        path = base_dir / path
    cols = ds.get("columns")
    if not isinstance(cols, list) or not cols:
        raise ConfigError(f"{source}: dataset.columns must be a non-empty list")
    try:
        columns = tuple(ColumnSpec.from_dict(c) for c in cols)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: dataset.columns: {exc}") from None
    if sum(c.role == "label" for c in columns) != 1:
        raise ConfigError(f"{source}: dataset.columns needs exactly one label column")
    missing = tuple(str(t) for t in ds.get("missing_tokens", DEFAULT_MISSING))

    pp = _section(d, "preprocessing", source)
    where = f"{source}: preprocessing"
    _pick(pp, set(Preprocessing.__dataclass_fields__), where)
    pre = Preprocessing(
        numeric_imputation=_choice(pp.get("numeric_imputation", "median"), NUMERIC_IMPUTATION,
                                   f"{where}.numeric_imputation"),
        categorical_imputation=_choice(pp.get("categorical_imputation", "mode"), CATEGORICAL_IMPUTATION,
                                       f"{where}.categorical_imputation"),
        knn_k=_int(pp.get("knn_k", 5), f"{where}.knn_k", 1),
        iqr_k=_real(pp.get("iqr_k", 1.5), f"{where}.iqr_k", allow_none=True),
        correlation_threshold=_real(pp.get("correlation_threshold"), f"{where}.correlation_threshold",
                                    allow_none=True),
    )
    if pre.iqr_k is not None and not pre.iqr_k > 0:
        raise ConfigError(f"{where}.iqr_k: must be > 0")
    if pre.correlation_threshold is not None and not 0 < pre.correlation_threshold <= 1:
        raise ConfigError(f"{where}.correlation_threshold: must be in (0, 1]")

    bl = _section(d, "balancing", source)
    where = f"{source}: balancing"
    _pick(bl, set(Balancing.__dataclass_fields__), where)
    bal = Balancing(method=_choice(bl.get("method", "ros"), BALANCING, f"{where}.method"),
                    k_neighbors=_int(bl.get("k_neighbors", 5), f"{where}.k_neighbors", 1),
                    m_neighbors=_int(bl.get("m_neighbors", 10), f"{where}.m_neighbors", 1))

    mode = _choice(d.get("mode", "strict"), MODES, f"{source}: mode")

    raw_models = d.get("models", {f: "default" for f in DEFAULT_ENSEMBLE})
    if not isinstance(raw_models, dict) or not raw_models:
        raise ConfigError(f"{source}: models must be a non-empty object")
    # families run in name order so that reports do not depend on key order
    models = {f: _grid(f, raw_models[f], f"{source}: models.{f}") for f in sorted(raw_models)}

    ensemble = d.get("ensemble", [f for f in DEFAULT_ENSEMBLE if f in models])
    if not isinstance(ensemble, list) or not ensemble:
        raise ConfigError(f"{source}: ensemble must be a non-empty list of model families")
    for f in ensemble:
        if f not in models:
            raise ConfigError(f"{source}: ensemble member {f!r} is not listed under models")
    if len(set(ensemble)) != len(ensemble):
        raise ConfigError(f"{source}: ensemble members must be distinct")

    if "seed" not in d:
        raise ConfigError(f"{source}: seed is required")
    try:
        seed = check_seed(d["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: seed: {exc}") from None

    frac = _real(d.get("test_fraction", 0.2), f"{source}: test_fraction")
    if not 0 < frac < 1:
        raise ConfigError(f"{source}: test_fraction must be in (0, 1)")

    ex = _section(d, "explain", source)
    where = f"{source}: explain"
    _pick(ex, set(ExplainSettings.__dataclass_fields__), where)
    rows = ex.get("rows", [0])
    if not isinstance(rows, list) or not all(isinstance(r, int) and r >= 0 for r in rows):
        raise ConfigError(f"{where}.rows: expected a list of non-negative row indices")
    explain = ExplainSettings(
        rows=tuple(rows),
        n_samples=_int(ex.get("n_samples", 5000), f"{where}.n_samples", 100),
        k_features=_int(ex.get("k_features", 5), f"{where}.k_features", 1),
        kernel_width=_real(ex.get("kernel_width"), f"{where}.kernel_width", allow_none=True),
        ridge_lambda=_real(ex.get("ridge_lambda", 1.0), f"{where}.ridge_lambda"),
    )

    out = Path(d.get("output_dir", "out"))
    if not out.is_absolute():
        out = base_dir / out
    return RunConfig(
        dataset_path=str(path), columns=columns, seed=seed, missing_tokens=missing,
        preprocessing=pre, balancing=bal, mode=mode, models=models, ensemble=tuple(ensemble),
        ensemble_weighting=_choice(d.get("ensemble_weighting", "rank"), WEIGHTINGS,
                                   f"{source}: ensemble_weighting"),
        cv_k=_int(d.get("cv_k", 5), f"{source}: cv_k", 2), test_fraction=frac,
        n_jobs=_int(d.get("n_jobs", 1), f"{source}: n_jobs"), output_dir=str(out), explain=explain,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(d, path.parent, str(path))


def config_from_resolved(d: Mapping[str, Any], source="<embedded>") -> RunConfig:
    """Rebuild a config from a report's embedded resolved copy (paths already absolute)."""
    return parse_config(dict(d), ".", source)
