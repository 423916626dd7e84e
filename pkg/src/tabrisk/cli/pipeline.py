"""Experiment orchestration: preprocess, split, balance, tune, ensemble, report.

Row bookkeeping uses positions in the preprocessed matrix (after outlier
removal); ``Prepared.row_ids`` maps them back to CSV data rows.

strict: a stratified holdout is set aside first. Balancing sees only
training folds and the final training set; the scaler is fit on the
training partition; the threshold is fit on out-of-fold ensemble
probabilities of the training side.

leaky: the scaler and the balancer see every row. Original rows keep the
same holdout and folds as in strict mode; synthetic rows are shuffled,
``test_fraction`` of them join the test side and the rest are dealt
round-robin over the folds.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..data import (
    Preprocessor,
    ScalerStats,
    Table,
    build_vocabulary,
    encode,
    filter_correlated,
    load_csv,
    outlier_mask,
)
from ..ensembler import EnsembleModel, clamp_threshold, optimize_threshold, rank_weights, weighted_average
from ..errors import AllRowsDropped, AllSafe, ArityMismatch, ConstantTruth, EmptyDangerSet, SingleClass
from ..evaluator import (
    FoldPlan,
    MetricSet,
    TuneReport,
    classification_report,
    error_metrics,
    fold_seed,
    grid_search,
    stratified_holdout,
    stratified_kfold,
)
from ..explainer import Explanation, LimeConfig, explain, write_top_features
from ..learners import ModelArtifact, fit_family, normalize_params
from ..persistence import load_model, save_model
from ..resampler import METHODS, ResampleConfig, resample
from ..rng import derive_seed, stream
from .config import RunConfig

log = logging.getLogger("tabrisk")

METRIC_COLUMNS = ["accuracy", "precision", "recall", "f1", "auc", "mae", "mse", "rmse", "r2"]


# ---------------------------------------------------------------- audit trail

@dataclass
class Audit:
    """Which preprocessed-row positions each fitting stage consumed."""

    test_rows: np.ndarray
    stages: dict = field(default_factory=dict)

    def record(self, stage: str, rows) -> None:
        rows = np.asarray(rows, dtype=np.int64)
        prev = self.stages.get(stage)
        self.stages[stage] = rows if prev is None else np.union1d(prev, rows)

    def leaks(self) -> dict[str, int]:
        return {s: int(np.intersect1d(r, self.test_rows).size) for s, r in sorted(self.stages.items())}

    def to_dict(self, mode: str) -> dict:
        leaks = self.leaks()
        return {"mode": mode, "test_rows": int(self.test_rows.size),
                "stages": {s: {"rows_seen": int(np.unique(r).size), "test_rows_seen": leaks[s]}
                           for s, r in sorted(self.stages.items())},
                "total_test_rows_seen": int(sum(leaks.values()))}


# ---------------------------------------------------------------- stage 1: data

@dataclass
class Prepared:
    X: np.ndarray                # encoded, unscaled, rows after outlier removal
    y: np.ndarray
    names: list[str]
    kinds: list[str]
    preprocessor: Preprocessor   # scaler unset
    row_ids: np.ndarray
    train: np.ndarray
    test: np.ndarray
    folds: FoldPlan              # over positions within ``train``


def read_table(cfg: RunConfig) -> Table:
    return load_csv(cfg.dataset_path, cfg.columns, cfg.missing_tokens)


def prepare(cfg: RunConfig, table: Table | None = None) -> Prepared:
    table = read_table(cfg) if table is None else table
    pp = cfg.preprocessing
    pre = Preprocessor.fit(table, pp.numeric_imputation, pp.categorical_imputation, pp.knn_k,
                           cfg.missing_tokens)
    imputed = pre.impute(table)
    pre.vocabulary = build_vocabulary(imputed)
    m = encode(imputed, pre.vocabulary)
    pre.encoded_names = list(m.feature_names)
    y = imputed.labels()
    row_ids = np.arange(len(y))
    if pp.iqr_k is not None:
        keep = outlier_mask(m.values, pp.iqr_k, m.numeric_columns())
        if not keep.any():
            raise AllRowsDropped(f"outlier removal with iqr_k={pp.iqr_k} dropped every row")
        m, y, row_ids = m.take_rows(keep), y[keep], row_ids[keep]
    kept = list(range(m.shape[1]))
    if pp.correlation_threshold is not None:
        m, kept = filter_correlated(m, pp.correlation_threshold)
    pre.kept = kept
    pre.feature_kinds = list(m.kinds)
    train, test = stratified_holdout(y, cfg.test_fraction, cfg.seed)
    folds = stratified_kfold(y[train], cfg.cv_k, cfg.seed)
    log.info("prepared %d rows x %d features (%d train / %d test)", len(y), m.shape[1], len(train), len(test))
    return Prepared(m.values, y, list(m.feature_names), list(m.kinds), pre, row_ids, train, test, folds)


def balance(X, y, method: str, cfg: RunConfig, tag: str):
    """(X, y, synthetic_count); originals first."""
    if method == "none":
        return X, y, 0
    rc = ResampleConfig(method, cfg.balancing.k_neighbors, cfg.balancing.m_neighbors,
                        derive_seed(cfg.seed, f"balance/{method}/{tag}"))
    r = resample(X, y, rc)
    return r.features, r.labels, r.synthetic_count


# ---------------------------------------------------------------- stage 2: fit

@dataclass
class PipelineResult:
    method: str
    mode: str
    tuning: dict[str, TuneReport]
    members: dict[str, ModelArtifact]
    ensemble: EnsembleModel
    per_model: dict[str, MetricSet]
    ensemble_metrics: MetricSet
    train_errors: MetricSet
    errors: list[tuple[str, str, str]]
    audit: Audit
    preprocessor: Preprocessor
    test_size: int
    synthetic: int


def _deal(rows: np.ndarray, k: int) -> list[np.ndarray]:
    return [rows[i::k] for i in range(k)]


def _metrics(y, p, threshold) -> MetricSet:
    m = classification_report(y, p, threshold)
    try:
        m = m.merged(error_metrics(y, p))
    except ConstantTruth:
        pass
    return m


def fit_pipeline(cfg: RunConfig, prep: Prepared, method: str | None = None,
                 grids: Mapping[str, Mapping] | None = None) -> PipelineResult:
    """One full fit/evaluate pass. ``grids`` overrides cfg.models per family."""
    method = cfg.balancing.method if method is None else method
    grids = {f: dict(g) for f, g in cfg.models.items()} if grids is None else dict(grids)
    X, y, train, test = prep.X, prep.y, prep.train, prep.test
    audit = Audit(test.copy())
    strict = cfg.mode == "strict"

    scaler = ScalerStats.fit(X[train] if strict else X)
    audit.record("scaling", train if strict else np.arange(len(y)))
    Xs = scaler.transform(X)
    pre = replace(prep.preprocessor, scaler=scaler)

    if strict:
        Xtr, ytr = Xs[train], y[train]
        Xte, yte = Xs[test], y[test]
        folds = prep.folds
        cache = {}

        def balancer(Xa, ya, tag):
            if tag not in cache:
                cache[tag] = balance(Xa, ya, method, cfg, tag)[:2]
            return cache[tag]

        def on_fit(family, i, rows):
            audit.record("balancing", train[rows])
            audit.record("tuning", train[rows])

        Xfit, yfit, n_syn = balance(Xtr, ytr, method, cfg, "full")
        audit.record("balancing", train)
        tune_X, tune_y, tune_balancer, tune_folds = Xtr, ytr, balancer, folds
        threshold_rows = train
    else:
        Xb, yb, n_syn = balance(Xs, y, method, cfg, "full")
        audit.record("balancing", np.arange(len(y)))
        n = len(y)
        syn = n + stream(cfg.seed, "leaky-split").permutation(n_syn)
        n_syn_test = int(math.floor(cfg.test_fraction * n_syn + 0.5))
        syn_test, syn_train = syn[:n_syn_test], syn[n_syn_test:]
        # training side: original train rows then synthetic train rows
        T = np.concatenate([train, syn_train])
        local_syn = len(train) + np.arange(len(syn_train))
        dealt = _deal(local_syn, prep.folds.k)
        folds = FoldPlan(prep.folds.k, tuple(np.sort(np.concatenate([f, d]))
                                             for f, d in zip(prep.folds.folds, dealt)), cfg.seed)
        Xfit, yfit = Xb[T], yb[T]
        te = np.concatenate([test, syn_test])
        Xte, yte = Xb[te], yb[te]

        def on_fit(family, i, rows):
            audit.record("tuning", T[rows][T[rows] < n])

        tune_X, tune_y, tune_balancer, tune_folds = Xfit, yfit, None, folds
        threshold_rows = train

    tuning = {}
    for fam, grid in grids.items():
        log.info("tuning %s (%s, %s)", fam, method, cfg.mode)
        tuning[fam] = grid_search(fam, grid, tune_X, tune_y, folds=tune_folds, seed=cfg.seed,
                                  balancer=tune_balancer, on_fit=on_fit, n_jobs=cfg.n_jobs)

    errors = []
    members = {}
    per_model = {}
    for fam, rep in tuning.items():
        params = normalize_params(fam, rep.best_params)
        model = fit_family(fam, Xfit, yfit, params, fold_seed(cfg.seed, fam, "full"))
        art = ModelArtifact(fam, model, rep.best_params, fold_seed(cfg.seed, fam, "full"), pre,
                            {"cv_mean_f1": rep.best_score, "balancing": method, "mode": cfg.mode})
        members[fam] = art
        try:
            per_model[fam] = _metrics(yte, art.predict_proba(Xte)[:, 1], 0.5)
        except SingleClass as exc:
            errors.append((fam, type(exc).__name__, str(exc)))

    names = list(cfg.ensemble)
    scores = [tuning[f].best_score for f in names]
    if len(names) == 1:
        weights = [1.0]
    elif cfg.ensemble_weighting == "uniform":
        weights = [1.0 / len(names)] * len(names)
    else:
        weights = rank_weights(scores)
    oof = weighted_average([np.column_stack([1 - tuning[f].oof_proba, tuning[f].oof_proba]) for f in names],
                           weights)[:, 1]
    audit.record("threshold", threshold_rows)
    sweep = optimize_threshold(oof, tune_y)
    ens = EnsembleModel([members[f] for f in names], weights, clamp_threshold(sweep.chosen),
                        {"mode": cfg.mode, "balancing": method, "families": names})
    p_te = ens.predict_proba(Xte)[:, 1]
    ens_metrics = _metrics(yte, p_te, ens.threshold)
    p_fit = ens.predict_proba(Xfit)[:, 1]
    train_err = MetricSet(mae=float(np.mean(np.abs(yfit - p_fit))), mse=float(np.mean((yfit - p_fit) ** 2)))
    return PipelineResult(method, cfg.mode, tuning, members, ens, per_model, ens_metrics, train_err,
                          errors, audit, pre, len(yte), n_syn)


def singleton_grids(result: PipelineResult) -> dict[str, dict]:
    """Each family's tuned cell as a one-cell grid."""
    return {f: {k: [v] for k, v in rep.best_params.items()} for f, rep in result.tuning.items()}


# ---------------------------------------------------------------- reports

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metric_row(m: MetricSet | None) -> list:
    d = {} if m is None else m.as_dict()
    return [d.get(c) for c in METRIC_COLUMNS]


def provenance(cfg: RunConfig) -> dict:
    resolved = cfg.to_dict()
    resolved.pop("output_dir")
    resolved.pop("n_jobs")
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed, "mode": cfg.mode, "config": resolved}


def _pct(v) -> str:
    return "" if v is None else f"{100 * v:.2f}"


def _md_table(header, rows) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(rows_i) + " |" for rows_i in rows]
    return out


@dataclass
class RunReport:
    provenance: dict
    main: PipelineResult | None = None
    balancing: list[dict] | None = None
    ablation: list[dict] | None = None

    def to_dict(self) -> dict:
        d = {"provenance": self.provenance}
        r = self.main
        if r is not None:
            d["per_model"] = {f: m.as_dict() for f, m in r.per_model.items()}
            d["ensemble"] = {"members": list(r.ensemble.metadata["families"]), "weights": r.ensemble.weights,
                             "threshold": r.ensemble.threshold, "metrics": r.ensemble_metrics.as_dict(),
                             "train_errors": r.train_errors.as_dict()}
            d["tuning"] = {f: rep.summary() for f, rep in r.tuning.items()}
            d["balancing_method"] = r.method
            d["synthetic_rows"] = r.synthetic
            d["test_rows"] = r.test_size
            d["errors"] = [list(e) for e in r.errors]
        if self.balancing is not None:
            d["balancing_comparison"] = self.balancing
        if self.ablation is not None:
            d["ablation"] = self.ablation
        return d

    def markdown(self) -> str:
        p = self.provenance
        lines = ["# Experiment report", "",
                 f"- mode: **{p['mode']}**" + (" (balancing before the split; scores are optimistic)"
                                              if p["mode"] == "leaky" else " (leakage-safe protocol)"),
                 f"- seed: {p['seed']}", f"- config hash: `{p['config_hash']}`", ""]
        r = self.main
        if r is not None:
            lines += [f"## Per-model test metrics (balancing: {r.method})", ""]
            lines += _md_table(["Model", "Accuracy", "Precision", "Recall", "F1", "AUC"],
                               [[f, *(_pct(getattr(m, c)) for c in ("accuracy", "precision", "recall", "f1", "auc"))]
                                for f, m in r.per_model.items()])
            e = r.ensemble_metrics
            lines += ["", "## Ensemble", "",
                      "members: " + ", ".join(f"{f} ({w:.4f})" for f, w in
                                              zip(r.ensemble.metadata["families"], r.ensemble.weights)),
                      f"threshold: {r.ensemble.threshold!r}", ""]
            lines += _md_table(["Accuracy", "Precision", "Recall", "F1", "AUC"],
                               [[_pct(getattr(e, c)) for c in ("accuracy", "precision", "recall", "f1", "auc")]])
            lines += [""]
            lines += _md_table(["MAE", "MSE", "RMSE", "R2"],
                               [["" if getattr(e, c) is None else f"{getattr(e, c):.4f}"
                                 for c in ("mae", "mse", "rmse", "r2")]])
            lines += ["", "## Tuning", ""]
            lines += _md_table(["Model", "Cells", "Best mean CV F1", "Best params"],
                               [[f, str(len(rep.grid)), f"{rep.best_score:.4f}",
                                 json.dumps(rep.best_params, sort_keys=True)] for f, rep in r.tuning.items()])
            if r.errors:
                lines += ["", "## Errors", ""] + [f"- {a}: {b}: {c}" for a, b, c in r.errors]
        if self.balancing is not None:
            lines += ["", "## Balancing comparison", ""]
            lines += _md_table(["Method", "Status", "Accuracy", "F1"],
                               [[b["method"], b["status"], _pct(b.get("accuracy")), _pct(b.get("f1"))]
                                for b in self.balancing])
        if self.ablation is not None:
            lines += ["", "## Balancing ablation", ""]
            lines += _md_table(["Arm", "MSE (train)", "MSE (test)", "MAE (train)", "MAE (test)", "R2 (test)"],
                               [[a["arm"], *(("" if a.get(c) is None else f"{a[c]:.4f}")
                                             for c in ("train_mse", "test_mse", "train_mae", "test_mae", "test_r2"))]
                                for a in self.ablation])
        return "\n".join(lines) + "\n"


def write_report(report: RunReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    mode = report.provenance["mode"]
    r = report.main
    if r is not None:
        _write_csv(out / "per_model.csv", ["mode", "balancing", "model", *METRIC_COLUMNS],
                   [[mode, r.method, f, *_metric_row(m)] for f, m in r.per_model.items()])
        fams = r.ensemble.metadata["families"]
        _write_csv(out / "ensemble.csv", ["mode", "balancing", "members", "weights", "threshold", *METRIC_COLUMNS],
                   [[mode, r.method, ";".join(fams), ";".join(repr(w) for w in r.ensemble.weights),
                     r.ensemble.threshold, *_metric_row(r.ensemble_metrics)]])
        _write_csv(out / "errors.csv", ["model", "error", "message"], r.errors)
        for f, rep in r.tuning.items():
            rep.write_csv(out / f"tune_{f}.csv")
            rep.write_json(out / f"tune_{f}.json")
        _write_json(out / "audit.json", r.audit.to_dict(mode))
        save_model(r.ensemble, out / "model.json")
    if report.balancing is not None:
        _write_csv(out / "balancing.csv", ["mode", "method", "status", "accuracy", "f1", "error"],
                   [[mode, b["method"], b["status"], b.get("accuracy"), b.get("f1"), b.get("error", "")]
                    for b in report.balancing])
    if report.ablation is not None:
        cols = ["arm", "method", "train_mse", "train_mae", "test_mse", "test_mae", "test_r2"]
        _write_csv(out / "ablation.csv", ["mode", *cols], [[mode, *(a.get(c) for c in cols)] for a in report.ablation])
    _write_json(out / "report.json", report.to_dict())
    (out / "report.md").write_text(report.markdown())


# ---------------------------------------------------------------- verbs

def run_experiment(cfg: RunConfig, prep: Prepared | None = None, write: bool = True) -> RunReport:
    prep = prepare(cfg) if prep is None else prep
    result = fit_pipeline(cfg, prep)
    report = RunReport(provenance(cfg), result)
    if write:
        write_report(report, Path(cfg.output_dir))
    return report


def _tuned_base(cfg: RunConfig, prep: Prepared, base: PipelineResult | None) -> PipelineResult:
    if base is not None:
        return base
    method = cfg.balancing.method if cfg.balancing.method != "none" else "ros"
    return fit_pipeline(cfg, prep, method)


def balancing_comparison(cfg: RunConfig, prep: Prepared, base: PipelineResult | None = None) -> list[dict]:
    """One pass per oversampling method, sharing the tuned cells of ``base``.

    Holdout, folds and model seeds are identical across methods.
    """
    base = _tuned_base(cfg, prep, base)
    grids = singleton_grids(base)
    rows = []
    for method in METHODS:
        try:
            r = base if method == base.method else fit_pipeline(cfg, prep, method, grids)
        except (EmptyDangerSet, AllSafe) as exc:
            rows.append({"method": method, "status": "failed", "error": f"{type(exc).__name__}: {exc}"})
            continue
        rows.append({"method": method, "status": "ok", "accuracy": r.ensemble_metrics.accuracy,
                     "f1": r.ensemble_metrics.f1})
    return rows


def ablation(cfg: RunConfig, prep: Prepared, base: PipelineResult | None = None) -> list[dict]:
    """Unbalanced vs balanced arms on the same holdout, folds and tuned cells."""
    base = _tuned_base(cfg, prep, base)
    grids = singleton_grids(base)
    arms = [("unbalanced", fit_pipeline(cfg, prep, "none", grids)), ("balanced", base)]
    out = []
    for arm, r in arms:
        e = r.ensemble_metrics
        out.append({"arm": arm, "method": r.method, "train_mse": r.train_errors.mse, "train_mae": r.train_errors.mae,
                    "test_mse": e.mse, "test_mae": e.mae, "test_r2": e.r2})
    return out


def run_balancing_comparison(cfg: RunConfig, write: bool = True) -> RunReport:
    prep = prepare(cfg)
    base = _tuned_base(cfg, prep, None)
    report = RunReport(provenance(cfg), base, balancing=balancing_comparison(cfg, prep, base))
    if write:
        write_report(report, Path(cfg.output_dir))
    return report


def run_ablation(cfg: RunConfig, write: bool = True) -> RunReport:
    prep = prepare(cfg)
    base = _tuned_base(cfg, prep, None)
    report = RunReport(provenance(cfg), base, ablation=ablation(cfg, prep, base))
    if write:
        write_report(report, Path(cfg.output_dir))
    return report


def tune(cfg: RunConfig, write: bool = True) -> dict[str, TuneReport]:
    """Grid search only, on the protocol's training side."""
    prep = prepare(cfg)
    strict = cfg.mode == "strict"
    X, y = prep.X, prep.y
    scaler = ScalerStats.fit(X[prep.train] if strict else X)
    Xs = scaler.transform(X)
    method = cfg.balancing.method
    if strict:
        def balancer(Xa, ya, tag):
            return balance(Xa, ya, method, cfg, tag)[:2]
        reports = {f: grid_search(f, g, Xs[prep.train], y[prep.train], folds=prep.folds, seed=cfg.seed,
                                  balancer=balancer, n_jobs=cfg.n_jobs) for f, g in cfg.models.items()}
    else:
        Xb, yb, _ = balance(Xs, y, method, cfg, "full")
        reports = {f: grid_search(f, g, Xb, yb, k=cfg.cv_k, seed=cfg.seed, n_jobs=cfg.n_jobs)
                   for f, g in cfg.models.items()}
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for f, rep in reports.items():
            rep.write_csv(out / f"tune_{f}.csv")
            rep.write_json(out / f"tune_{f}.json")
        _write_json(out / "tune_provenance.json", provenance(cfg))
    return reports


def explain_batch(model_path, dataset_path, cfg: RunConfig, out: Path | None = None) -> list[Explanation]:
    """Explain ``cfg.explain.rows`` of ``dataset_path``; one JSON per row plus top_features.csv."""
    model = load_model(model_path)
    pre = model.preprocessor
    if pre is None:
        raise ArityMismatch("model carries no preprocessor; cannot map dataset rows to features")
    table = load_csv(dataset_path, pre.columns, pre.missing_tokens)
    m = pre.transform(table)
    if m.shape[1] != model.feature_count:
        raise ArityMismatch(f"model expects {model.feature_count} features, dataset gives {m.shape[1]}")
    ex = cfg.explain
    out = Path(cfg.output_dir) if out is None else Path(out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for r in ex.rows:
        if r >= len(m.values):
            raise IndexError(f"row {r} out of range for {len(m.values)} rows")
        lc = LimeConfig(ex.n_samples, ex.kernel_width, min(ex.k_features, m.shape[1]), ex.ridge_lambda,
                        derive_seed(cfg.seed, f"explain/row{r}"))
        e = explain(model, m.values[r], m, lc)
        e.write_json(out / f"explanation_row{r}.json")
        results.append(e)
    write_top_features(out / "top_features.csv", ex.rows, results)
    return results
