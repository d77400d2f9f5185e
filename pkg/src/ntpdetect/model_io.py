"""Self-describing JSON serialization for trained models.

A saved document carries the learner kind, its constructor parameters, the
fitted state (including the training-split standardization statistics), the
feature configuration and names the model was trained on, and the training
seed. Loading reconstructs an estimator whose scores match the original
bit-for-bit, so a model trained inside an experiment run can be reused by
the CLI ``score`` command.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .boosting import BoostedTreesClassifier
from .data import Dataset
from .features import FeatureConfig, featurize_dataset
from .linear import LogisticRegressionClassifier
from .svm import SVMClassifier

MODEL_SCHEMA_VERSION = 1

LEARNERS = {
    "logreg": LogisticRegressionClassifier,
    "svm": SVMClassifier,
    "gbt": BoostedTreesClassifier,
}


def learner_kind(model) -> str:
    for kind, cls in LEARNERS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"unknown learner type {type(model).__name__}")


def _arr(x):
    return None if x is None else np.asarray(x).tolist()


def model_to_json_obj(model, feature_names, feature_config: FeatureConfig | None = None, seed: int | None = None) -> dict:
    kind = learner_kind(model)
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": kind,
        "params": model.get_params(),
        "feature_names": list(feature_names),
        "feature_config": feature_config.to_json_obj() if feature_config is not None else None,
        "seed": seed,
    }
    if kind == "logreg":
        doc["fitted"] = {
            "coef": _arr(model.coef_),
            "intercept": model.intercept_,
            "classes": _arr(model.classes_),
            "scaler_mean": _arr(model.scaler_mean_),
            "scaler_std": _arr(model.scaler_std_),
            "n_features_in": model.n_features_in_,
        }
    elif kind == "svm":
        doc["fitted"] = {
            "support_vectors": _arr(model.support_vectors_),
            "dual_coef": _arr(model.dual_coef_),
            "intercept": model.intercept_,
            "gamma_resolved": model.gamma_,
            "classes": _arr(model.classes_),
            "scaler_mean": _arr(model.scaler_mean_),
            "scaler_std": _arr(model.scaler_std_),
            "n_features_in": model.n_features_in_,
            "converged": model.converged_,
        }
    else:
        doc["fitted"] = {
            "tree_feats": _arr(model.tree_feats_),
            "tree_thrs": _arr(model.tree_thrs_),
            "tree_values": _arr(model.tree_values_),
            "classes": _arr(model.classes_),
            "n_features_in": model.n_features_in_,
        }
    return doc


def model_from_json_obj(doc: dict):
    """Rebuild (estimator, feature_names, feature_config) from a saved document."""
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {doc.get('schema_version')!r}")
    kind = doc["kind"]
    if kind not in LEARNERS:
        raise ValueError(f"unknown learner kind {kind!r}")
    model = LEARNERS[kind](**doc["params"])
    f = doc["fitted"]
    model.classes_ = np.asarray(f["classes"])
    model.n_features_in_ = int(f["n_features_in"])
    if kind == "logreg":
        model.coef_ = np.asarray(f["coef"], dtype=float)
        model.intercept_ = float(f["intercept"])
        model.scaler_mean_ = None if f["scaler_mean"] is None else np.asarray(f["scaler_mean"], dtype=float)
        model.scaler_std_ = None if f["scaler_std"] is None else np.asarray(f["scaler_std"], dtype=float)
    elif kind == "svm":
        model.support_vectors_ = np.asarray(f["support_vectors"], dtype=float).reshape(-1, model.n_features_in_)
        model.dual_coef_ = np.asarray(f["dual_coef"], dtype=float)
        model.alphas_ = np.abs(model.dual_coef_)
        model.intercept_ = float(f["intercept"])
        model.gamma_ = f["gamma_resolved"]
        model.scaler_mean_ = None if f["scaler_mean"] is None else np.asarray(f["scaler_mean"], dtype=float)
        model.scaler_std_ = None if f["scaler_std"] is None else np.asarray(f["scaler_std"], dtype=float)
        model.converged_ = bool(f["converged"])
    else:
        model.tree_feats_ = np.asarray(f["tree_feats"], dtype=np.int32)
        model.tree_thrs_ = np.asarray(f["tree_thrs"], dtype=np.float64)
        model.tree_values_ = np.asarray(f["tree_values"], dtype=np.float64)
    names = tuple(doc["feature_names"])
    config = None if doc.get("feature_config") is None else FeatureConfig.from_json_obj(doc["feature_config"])
    return model, names, config


def save_model(model, feature_names, path, feature_config: FeatureConfig | None = None, seed: int | None = None) -> None:
    doc = model_to_json_obj(model, feature_names, feature_config, seed)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return model_from_json_obj(doc)


def score_dataset(model, feature_names, feature_config: FeatureConfig, dataset: Dataset) -> np.ndarray:
    """Featurize records with the model's stored config and score them.

    Raises when the dataset produces a different feature set than the model
    was trained on.
    """
    if feature_config is None:
        raise ValueError("model document carries no feature_config; cannot featurize records")
    X, names = featurize_dataset(dataset, feature_config)
    if names != tuple(feature_names):
        raise ValueError(
            f"feature mismatch: model expects {len(feature_names)} features {list(feature_names)[:4]}..., "
            f"dataset produced {len(names)}"
        )
    return model.decision_function(X)
