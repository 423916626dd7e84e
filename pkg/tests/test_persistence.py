import json

import numpy as np
import pytest

from conftest import blobs
from tabrisk.ensembler import EnsembleModel, rank_weights
from tabrisk.errors import CorruptDocument, VersionMismatch
from tabrisk.learners import ModelArtifact, fit_family
from tabrisk.persistence import dumps, load_model, save_model


@pytest.fixture(scope="module")
def ensemble():
    X, y = blobs(80, seed=6)
    arts = [ModelArtifact(f, fit_family(f, X, y, p, 2), p, 2) for f, p in
            [("rf", {"n_estimators": 4}), ("lr", {"C": 1.0}), ("xgb", {"n_estimators": 5}),
             ("gb", {"n_estimators": 3}), ("nb", {}), ("et", {"n_estimators": 3})]]
    return EnsembleModel(arts, rank_weights([0.9, 0.7, 0.8, 0.6, 0.5, 0.4]), 0.37), X


def test_round_trip_ensemble(tmp_path, ensemble):
    ens, X = ensemble
    save_model(ens, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.max(np.abs(back.predict_proba(X) - ens.predict_proba(X))) <= 1e-15
    assert back.threshold == ens.threshold
    assert dumps(back) == dumps(ens)


def test_round_trip_each_member(tmp_path, ensemble):
    ens, X = ensemble
    for i, art in enumerate(ens.members):
        save_model(art, tmp_path / f"a{i}.json")
        back = load_model(tmp_path / f"a{i}.json")
        assert back.family == art.family
        assert np.max(np.abs(back.predict_proba(X) - art.predict_proba(X))) <= 1e-15


def test_truncated_file(tmp_path, ensemble):
    text = dumps(ensemble[0])
    p = tmp_path / "t.json"
    p.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptDocument):
        load_model(p)


def test_future_version(tmp_path, ensemble):
    doc = json.loads(dumps(ensemble[0]))
    doc["format_version"] = 99
    p = tmp_path / "v.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(VersionMismatch):
        load_model(p)


def test_header_mismatch_and_missing_payload(tmp_path, ensemble):
    doc = json.loads(dumps(ensemble[0]))
    doc["feature_count"] += 1
    p = tmp_path / "h.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(CorruptDocument):
        load_model(p)
    del doc["payload"]
    p.write_text(json.dumps(doc))
    with pytest.raises(CorruptDocument):
        load_model(p)
    p.write_text(json.dumps({"format": "other"}))
    with pytest.raises(CorruptDocument):
        load_model(p)
