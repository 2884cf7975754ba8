"""Supervised learning registry.

Kinds: rf_classifier, rf_regressor, knn, gaussian_nb, logistic. Training is
reproducible given (kind, config, seed, data); kNN and logistic consume
standardized features (the standardizer is always captured on the training
data and stored on the model). Models serialize to a versioned JSON
structure for audit and reload.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..config import ModelConfig
from . import forest as _forest
from . import simple as _simple
from .standardize import Standardizer, standardize_apply, standardize_fit

MODEL_KINDS = ("rf_classifier", "rf_regressor", "knn", "gaussian_nb", "logistic")
CLASSIFIER_KINDS = ("rf_classifier", "knn", "gaussian_nb", "logistic")

SER_VERSION = "1.0"


@dataclass
class Dataset:
    """Feature matrix plus target; the target type fixes the task.

    ``sample_groups`` (one id per row, e.g. surface ids) enables the
    group-holdout split mode where a group never spans train and test.
    """

    X: np.ndarray
    y: np.ndarray                       # float targets or string labels
    feature_names: tuple[str, ...]
    task: str                           # "classification" | "regression"
    group_tags: dict[str, str] = field(default_factory=dict)
    sample_groups: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "regression":
            self.y = np.asarray(self.y, dtype=np.float64)
        else:
            self.y = np.asarray(self.y)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y shapes disagree")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length does not match X")
        if self.sample_groups is not None:
            self.sample_groups = np.asarray(self.sample_groups)
            if self.sample_groups.shape[0] != self.X.shape[0]:
                raise ValueError("sample_groups length does not match X")

    def validate(self, min_rows: int = 10) -> None:
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset contains non-finite features")
        if self.task == "regression" and not np.all(np.isfinite(self.y)):
            raise ValueError("dataset contains non-finite targets")
        if self.X.shape[0] < min_rows:
            raise ValueError(f"dataset too small: {self.X.shape[0]} < {min_rows}")

    def subset(self, rows=None, features: tuple[str, ...] | None = None) -> "Dataset":
        """Row/column subset; feature columns keep their original order."""
        X = self.X
        y = self.y
        groups = self.sample_groups
        if rows is not None:
            X = X[rows]
            y = y[rows]
            if groups is not None:
                groups = groups[rows]
        names = self.feature_names
        if features is not None:
            keep = [i for i, n in enumerate(self.feature_names) if n in set(features)]
            X = X[:, keep]
            names = tuple(self.feature_names[i] for i in keep)
        return Dataset(X=X, y=y, feature_names=names, task=self.task,
                       group_tags={n: g for n, g in self.group_tags.items()
                                   if n in names},
                       sample_groups=groups)


@dataclass
class TrainedModel:
    kind: str
    seed: int
    standardizer: Standardizer
    feature_names: tuple[str, ...]
    classes: tuple | None               # label order for classifier kinds
    payload: object

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class ImportanceRanking:
    """(feature, importance) pairs, descending; ties broken by name."""

    entries: tuple[tuple[str, float], ...]

    def names(self) -> list[str]:
        return [n for n, _ in self.entries]

    def top(self, k: int) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries[:k])


def _encode_labels(y: np.ndarray) -> tuple[np.ndarray, tuple]:
    classes = tuple(sorted({str(v) for v in y}))
    index = {c: i for i, c in enumerate(classes)}
    codes = np.array([index[str(v)] for v in y], dtype=np.int64)
    return codes, classes


def train(kind: str, dataset: Dataset, seed: int = 0,
          config: ModelConfig = ModelConfig()) -> TrainedModel:
    """Fit one model kind on a dataset."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    dataset.validate(min_rows=2)
    is_classifier = kind in CLASSIFIER_KINDS
    if is_classifier and dataset.task != "classification":
        raise ValueError(f"{kind} requires a classification dataset")
    if not is_classifier and dataset.task != "regression":
        raise ValueError(f"{kind} requires a regression dataset")

    standardizer = standardize_fit(dataset.X)
    classes: tuple | None = None
    codes = None
    if is_classifier:
        codes, classes = _encode_labels(dataset.y)
        counts = np.bincount(codes)
        lonely = np.nonzero(counts < 2)[0]
        if lonely.size:
            raise ValueError(
                f"class {classes[lonely[0]]!r} has fewer than 2 training samples")

    if kind == "rf_classifier":
        payload = _forest.build_forest(
            dataset.X, codes, seed, config.forest.n_trees, True,
            n_classes=len(classes), min_leaf=config.forest.min_leaf,
            max_depth=config.forest.max_depth)
    elif kind == "rf_regressor":
        payload = _forest.build_forest(
            dataset.X, dataset.y, seed, config.forest.n_trees, False,
            min_leaf=config.forest.min_leaf, max_depth=config.forest.max_depth)
    elif kind == "knn":
        Xs = standardize_apply(standardizer, dataset.X)
        payload = _simple.knn_fit(Xs, codes, config.knn_k)
    elif kind == "gaussian_nb":
        payload = _simple.gnb_fit(dataset.X, codes, len(classes),
                                  config.nb_var_floor)
    else:
        Xs = standardize_apply(standardizer, dataset.X)
        payload = _simple.logistic_fit(Xs, codes, len(classes),
                                       config.logistic_l2,
                                       config.logistic_grad_tol)
    return TrainedModel(kind=kind, seed=seed, standardizer=standardizer,
                        feature_names=dataset.feature_names, classes=classes,
                        payload=payload)


def _check_width(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, "
                         f"got {arr.shape[1]}")
    return arr


def predict(model: TrainedModel, X) -> np.ndarray:
    """Regression prediction (rf_regressor)."""
    arr = _check_width(model, X)
    if model.kind != "rf_regressor":
        raise ValueError(f"predict is for regression kinds, not {model.kind}")
    return _forest.forest_predict_mean(model.payload, arr)


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    """Class probabilities in ``model.classes`` order."""
    arr = _check_width(model, X)
    if model.kind == "rf_classifier":
        return _forest.forest_predict_proba(model.payload, arr)
    if model.kind == "gaussian_nb":
        return _simple.gnb_predict_proba(model.payload, arr)
    if model.kind == "logistic":
        Xs = standardize_apply(model.standardizer, arr)
        return _simple.logistic_predict_proba(model.payload, Xs)
    raise ValueError(f"{model.kind} does not expose probabilities")


def predict_class(model: TrainedModel, X) -> np.ndarray:
    """Predicted labels from the training label set."""
    arr = _check_width(model, X)
    if model.kind not in CLASSIFIER_KINDS:
        raise ValueError(f"predict_class is for classifiers, not {model.kind}")
    if model.kind == "knn":
        Xs = standardize_apply(model.standardizer, arr)
        codes = _simple.knn_predict(model.payload, Xs, len(model.classes))
    else:
        codes = np.argmax(predict_proba(model, arr), axis=1)
    labels = np.array(model.classes, dtype=object)
    return labels[codes]


def rf_feature_importance(model: TrainedModel) -> ImportanceRanking:
    """Mean decrease in impurity, normalized to sum 1; ties by name."""
    if model.kind not in ("rf_classifier", "rf_regressor"):
        raise ValueError(f"feature importance requires an rf kind, "
                         f"not {model.kind}")
    raw = model.payload.importance_raw
    total = float(raw.sum())
    norm = raw / total if total > 0 else raw
    pairs = sorted(zip(model.feature_names, norm),
                   key=lambda t: (-t[1], t[0]))
    return ImportanceRanking(entries=tuple((n, float(v)) for n, v in pairs))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_PAYLOAD_CODECS = {
    "rf_classifier": (lambda p: p.to_dict(), _forest.Forest.from_dict),
    "rf_regressor": (lambda p: p.to_dict(), _forest.Forest.from_dict),
    "knn": (lambda p: p.to_dict(), _simple.KnnData.from_dict),
    "gaussian_nb": (lambda p: p.to_dict(), _simple.GnbParams.from_dict),
    "logistic": (lambda p: p.to_dict(), _simple.LogisticParams.from_dict),
}


def model_to_json(model: TrainedModel) -> str:
    encode, _ = _PAYLOAD_CODECS[model.kind]
    doc = {
        "version": SER_VERSION,
        "kind": model.kind,
        "seed": model.seed,
        "feature_names": list(model.feature_names),
        "classes": list(model.classes) if model.classes else None,
        "standardizer": model.standardizer.to_dict(),
        "payload": encode(model.payload),
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("version") != SER_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    _, decode = _PAYLOAD_CODECS[doc["kind"]]
    return TrainedModel(
        kind=doc["kind"], seed=int(doc["seed"]),
        standardizer=Standardizer.from_dict(doc["standardizer"]),
        feature_names=tuple(doc["feature_names"]),
        classes=tuple(doc["classes"]) if doc["classes"] else None,
        payload=decode(doc["payload"]))
