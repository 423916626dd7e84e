"""JSON documents for fitted artifacts and ensembles.

Floats are written with Python's shortest round-trip repr, so a reload
reproduces every threshold and leaf value bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

from .ensembler import EnsembleModel
from .errors import CorruptDocument, TabriskError, VersionMismatch
from .learners import ModelArtifact

FORMAT = "tabrisk-model"
FORMAT_VERSION = 1


def to_document(obj: ModelArtifact | EnsembleModel) -> dict:
    if not isinstance(obj, (ModelArtifact, EnsembleModel)):
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return {"format": FORMAT, "format_version": FORMAT_VERSION,
            "feature_count": obj.feature_count, "payload": obj.to_dict()}


def from_document(doc) -> ModelArtifact | EnsembleModel:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CorruptDocument("not a model document")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"document format_version {version!r}, this build reads {FORMAT_VERSION}")
    try:
        payload = doc["payload"]
        kind = payload["kind"]
        if kind == "artifact":
            obj = ModelArtifact.from_dict(payload)
        elif kind == "ensemble":
            obj = EnsembleModel.from_dict(payload)
        else:
            raise CorruptDocument(f"unknown payload kind {kind!r}")
    except TabriskError:
        raise
    except (KeyError, TypeError, ValueError, IndexError, AttributeError) as exc:
        raise CorruptDocument(f"malformed model document: {exc}") from exc
    if obj.feature_count != doc.get("feature_count"):
        raise CorruptDocument("feature_count header does not match the payload")
    return obj


def dumps(obj) -> str:
    return json.dumps(to_document(obj), sort_keys=True, separators=(",", ":")) + "\n"


def save_model(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load_model(path) -> ModelArtifact | EnsembleModel:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptDocument(f"{path}: not valid JSON ({exc.msg})") from exc
    return from_document(doc)
