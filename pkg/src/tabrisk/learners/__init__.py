"""Learner families and the serializable model artifact."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..errors import ArityMismatch, CorruptDocument, InvalidParamForFamily
from .bayes import GaussianNBModel, fit_gnb
from .boosting import BoostedModel, fit_boosted
from .forest import ForestModel, fit_forest
from .linear import LinearModel, fit_logreg
from .tree import Tree, fit_tree

# Parameter spellings used in the tuning tables, mapped to keyword names.
ALIASES = {
    "n_est": "n_estimators",
    "lr": "learning_rate",
    "class_wt": "class_weight",
    "var_smooth": "var_smoothing",
    "min_samples_split": "min_split",
}


@dataclass(frozen=True)
class Family:
    name: str
    params: tuple[str, ...]
    fit: Callable
    uses_seed: bool = True


def _fit_rf(X, y, params, seed):
    return fit_forest(X, y, mode="bagging", seed=seed, **params)


def _fit_et(X, y, params, seed):
    return fit_forest(X, y, mode="extra", seed=seed, **params)


def _fit_gb(X, y, params, seed):
    return fit_boosted(X, y, variant="first_order", seed=seed, **params)


def _fit_xgb(X, y, params, seed):
    return fit_boosted(X, y, variant="second_order", seed=seed, **params)


def _fit_lr(X, y, params, seed):
    params = dict(params)
    solver = params.pop("solver", "liblinear")
    if solver not in ("liblinear", "proximal"):
        raise InvalidParamForFamily(f"lr: unsupported solver {solver!r}")
    return fit_logreg(X, y, **params)


def _fit_nb(X, y, params, seed):
    return fit_gnb(X, y, **params)


_FOREST = ("n_estimators", "max_depth", "min_split", "class_weight", "max_features", "n_jobs")
FAMILIES: dict[str, Family] = {
    "rf": Family("rf", _FOREST, _fit_rf),
    "et": Family("et", _FOREST, _fit_et),
    "gb": Family("gb", ("n_estimators", "learning_rate", "max_depth"), _fit_gb, uses_seed=False),
    "xgb": Family("xgb", ("n_estimators", "max_depth", "learning_rate", "reg_lambda", "reg_gamma"),
                  _fit_xgb, uses_seed=False),
    "lr": Family("lr", ("C", "penalty", "solver", "max_iter", "tol"), _fit_lr, uses_seed=False),
    "nb": Family("nb", ("var_smoothing",), _fit_nb, uses_seed=False),
}

# Tuning grids for the in-scope families, axes in table order.
DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "lr": {"C": [0.001, 0.01, 0.1, 1, 10], "penalty": ["l1", "l2"], "solver": ["liblinear"]},
    "rf": {"n_estimators": [100, 200], "max_depth": [None, 10, 20], "min_split": [2, 5]},
    "et": {"n_estimators": [100, 200], "max_depth": [None, 10, 20], "class_weight": ["balanced"]},
    "xgb": {"n_estimators": [100, 200], "max_depth": [3, 6, 9], "learning_rate": [0.01, 0.1]},
    "gb": {"n_estimators": [100, 200], "learning_rate": [0.01, 0.1], "max_depth": [3, 6]},
    "nb": {"var_smoothing": [1e-9, 1e-8, 1e-7]},
}

# Families listed in the tuning table that this package does not implement.
UNSUPPORTED_FAMILIES: dict[str, dict[str, list]] = {
    "svm": {"C": [0.1, 1, 10], "gamma": ["scale", "auto"], "kernel": ["rbf"]},
    "lgb": {"n_estimators": [100, 200], "num_leaves": [31, 63], "learning_rate": [0.01, 0.1]},
    "cb": {"iterations": [100, 200], "depth": [4, 6], "learning_rate": [0.01, 0.1]},
    "mlp": {"layers": [[50], [100], [50, 50]], "activation": ["relu", "tanh"], "alpha": [0.0001, 0.001]},
}


def family(name: str) -> Family:
    if name in UNSUPPORTED_FAMILIES:
        raise InvalidParamForFamily(f"model family {name!r} is not implemented")
    try:
        return FAMILIES[name]
    except KeyError:
        raise InvalidParamForFamily(f"unknown model family {name!r}") from None


def normalize_params(name: str, params: Mapping) -> dict:
    fam = family(name)
    out = {}
    for k, v in params.items():
        key = ALIASES.get(k, k)
        if key not in fam.params:
            raise InvalidParamForFamily(f"{name}: unknown parameter {k!r} (allowed: {', '.join(fam.params)})")
        out[key] = v
    return out


def fit_family(name: str, X, y, params: Mapping, seed: int = 0):
    fam = family(name)
    return fam.fit(X, y, normalize_params(name, params), seed)


_MODEL_TYPES = {
    "forest": ForestModel,
    "boosted": BoostedModel,
    "linear": LinearModel,
    "gnb": GaussianNBModel,
}


def model_from_dict(d: Mapping):
    try:
        cls = _MODEL_TYPES[d["type"]]
    except KeyError:
        raise CorruptDocument(f"unknown model type {d.get('type')!r}") from None
    return cls.from_dict(d)


def feature_count(model) -> int:
    return int(model.feature_count)


@dataclass
class ModelArtifact:
    """A fitted model plus everything needed to reproduce and apply it."""

    family: str
    model: object
    params: dict = field(default_factory=dict)
    seed: int = 0
    preprocessor: object | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def feature_count(self) -> int:
        return feature_count(self.model)

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self.model, X)

    def to_dict(self) -> dict:
        return {
            "kind": "artifact",
            "family": self.family,
            "params": _jsonable(self.params),
            "seed": self.seed,
            "feature_count": self.feature_count,
            "model": self.model.to_dict(),
            "preprocessor": None if self.preprocessor is None else self.preprocessor.to_dict(),
            "metadata": _jsonable(self.metadata),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelArtifact":
        from ..data import Preprocessor

        model = model_from_dict(d["model"])
        if feature_count(model) != int(d["feature_count"]):
            raise CorruptDocument("feature_count does not match the embedded model")
        pre = d.get("preprocessor")
        return cls(d["family"], model, dict(d.get("params", {})), int(d.get("seed", 0)),
                   None if pre is None else Preprocessor.from_dict(pre), dict(d.get("metadata", {})))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def predict_proba(model, X) -> np.ndarray:
    """(n, 2) class probabilities, columns ordered (class 0, class 1)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    n_feat = getattr(model, "feature_count", None)
    if n_feat is not None and X.shape[1] != n_feat:
        raise ArityMismatch(f"model expects {n_feat} features, got {X.shape[1]}")
    return model.predict_proba(X)


__all__ = [
    "Tree", "ForestModel", "BoostedModel", "LinearModel", "GaussianNBModel", "ModelArtifact",
    "fit_tree", "fit_forest", "fit_boosted", "fit_logreg", "fit_gnb", "fit_family", "family",
    "normalize_params", "predict_proba", "model_from_dict", "FAMILIES", "DEFAULT_GRIDS",
    "UNSUPPORTED_FAMILIES", "ALIASES",
]
