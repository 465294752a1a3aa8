"""Decision tree, logistic regression and K2 Bayesian network classifiers.

All three share :class:`Classifier`: ``predict_proba(X)`` gives
(p_skype, p_normal) rows and :func:`predict` gives a label plus
:class:`Posterior`. Models round-trip through versioned JSON files.
"""
from __future__ import annotations

import json
from pathlib import Path

from ..errors import ModelFormatError
from .bayesnet import BayesNetModel, k2_score, k2_search, train_bayesnet
from .common import MODEL_FORMAT, MODEL_VERSION, Classifier, Posterior, predict
from .logistic import LogisticModel, sigmoid, train_logistic
from .tree import TreeModel, entropy, information_gain, train_tree

MODEL_KINDS = {"tree": TreeModel, "logistic": LogisticModel, "bayesnet": BayesNetModel}
# display names used in reports, in report order
DISPLAY_NAMES = {"tree": "J48 (C4.5 tree)", "logistic": "Logistic", "bayesnet": "BayesNet (K2)"}
ENSEMBLE_ORDER = ("tree", "logistic", "bayesnet")


def model_to_json(model: Classifier, metadata: dict | None = None) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "metadata": metadata or {},
        "model": model.to_dict(),
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def model_from_json(text: str) -> Classifier:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a model file (format={doc.get('format')!r})")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        cls = MODEL_KINDS[doc["kind"]]
    except KeyError:
        raise ModelFormatError(f"unknown model kind {doc.get('kind')!r}") from None
    model = cls.from_dict(doc["model"])
    model.metadata = doc.get("metadata", {})
    return model


def save_model(model: Classifier, path, metadata: dict | None = None) -> None:
    Path(path).write_text(model_to_json(model, metadata))


def load_model(path) -> Classifier:
    return model_from_json(Path(path).read_text())


def train_all(ds, min_leaf: int = 2, max_parents: int = 3) -> dict[str, Classifier]:
    return {
        "tree": train_tree(ds, min_leaf=min_leaf),
        "logistic": train_logistic(ds),
        "bayesnet": train_bayesnet(ds, max_parents=max_parents),
    }


__all__ = [
    "BayesNetModel", "Classifier", "DISPLAY_NAMES", "ENSEMBLE_ORDER", "LogisticModel",
    "Posterior", "TreeModel", "entropy", "information_gain", "k2_score", "k2_search",
    "load_model", "model_from_json", "model_to_json", "predict", "save_model", "sigmoid",
    "train_all", "train_bayesnet", "train_logistic", "train_tree",
]
