"""The five classifier families behind one train/predict/serialize surface.

Kinds are addressed by short tokens: ``knn``, ``nb``, ``rf``, ``mlp``,
``xgb``. Estimators work on integer class indices; :class:`TrainedModel`
maps those back to the caller's labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from ..errors import ValidationError
from ..features import TARGET_CLASSES, FeatureVector
from .boosting import GradientBoosting
from .forest import RandomForest
from .knn import KNNClassifier
from .mlp import MLPClassifier
from .naive_bayes import GaussianNB

KINDS = ("knn", "nb", "rf", "mlp", "xgb")
KIND_NAMES = {
    "knn": "KNN",
    "nb": "NaiveBayes",
    "rf": "RandomForest",
    "mlp": "MLP",
    "xgb": "GradientBoost",
}
DEFAULTS: dict[str, dict[str, Any]] = {
    "knn": {"k": 15},
    "nb": {"var_floor": 1e-9},
    "rf": {"n_trees": 100, "max_depth": 12, "max_features": None, "bootstrap": True},
    "mlp": {"hidden": 64, "learning_rate": 0.01, "epochs": 200, "batch_size": 32},
    "xgb": {
        "n_rounds": 200,
        "max_depth": 3,
        "learning_rate": 0.1,
        "reg_lambda": 1.0,
        "min_child_weight": 1.0,
        "max_bins": 256,
    },
}
_POSITIVE_INT = {
    "k", "n_trees", "max_depth", "hidden", "epochs", "batch_size", "n_rounds", "max_features", "max_bins",
}
_POSITIVE_FLOAT = {"learning_rate", "var_floor"}
_NON_NEGATIVE_FLOAT = {"reg_lambda", "min_child_weight"}

MODEL_FORMAT = "demopred-model"
MODEL_VERSION = 1


def _check_param(kind: str, name: str, value) -> None:
    if name in _POSITIVE_INT:
        if value is None and name == "max_features":
            return
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ValidationError(f"{kind}: {name} must be an integer >= 1, got {value!r}")
    elif name in _POSITIVE_FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise ValidationError(f"{kind}: {name} must be > 0, got {value!r}")
    elif name in _NON_NEGATIVE_FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value >= 0:
            raise ValidationError(f"{kind}: {name} must be >= 0, got {value!r}")
    elif name == "bootstrap" and not isinstance(value, bool):
        raise ValidationError(f"{kind}: bootstrap must be true or false, got {value!r}")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 42

    __hash__ = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"classifier kind must be one of {KINDS}, got {self.kind!r}")
        unknown = set(self.hyperparams) - DEFAULTS[self.kind].keys()
        if unknown:
            raise ValidationError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        merged = {**DEFAULTS[self.kind], **self.hyperparams}
        for name, value in merged.items():
            _check_param(self.kind, name, value)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        object.__setattr__(self, "hyperparams", merged)

    @property
    def name(self) -> str:
        return KIND_NAMES[self.kind]


def _make_estimator(spec: ClassifierSpec, threads: int = 1):
    hp = spec.hyperparams
    if spec.kind == "knn":
        return KNNClassifier(k=hp["k"])
    if spec.kind == "nb":
        return GaussianNB(var_floor=hp["var_floor"])
    if spec.kind == "rf":
        return RandomForest(
            n_trees=hp["n_trees"],
            max_depth=hp["max_depth"],
            max_features=hp["max_features"],
            bootstrap=hp["bootstrap"],
            seed=spec.seed,
            threads=threads,
        )
    if spec.kind == "mlp":
        return MLPClassifier(
            hidden=hp["hidden"],
            learning_rate=hp["learning_rate"],
            epochs=hp["epochs"],
            batch_size=hp["batch_size"],
            seed=spec.seed,
        )
    return GradientBoosting(
        n_rounds=hp["n_rounds"],
        max_depth=hp["max_depth"],
        learning_rate=hp["learning_rate"],
        reg_lambda=hp["reg_lambda"],
        min_child_weight=hp["min_child_weight"],
        max_bins=hp["max_bins"],
    )


@dataclass
class TrainedModel:
    spec: ClassifierSpec
    class_labels: tuple
    feature_dim: int
    estimator: Any

    @property
    def kind(self) -> str:
        return self.spec.kind

    def _matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.feature_dim:
            raise ValidationError(
                f"expected vectors of length {self.feature_dim}, got shape {tuple(X.shape)}"
            )
        if not np.all(np.isfinite(X)):
            raise ValidationError("feature vectors must be finite")
        return X

    def predict_indices(self, X) -> np.ndarray:
        X = self._matrix(X)
        if len(X) == 0:
            return np.zeros(0, dtype=np.int64)
        return self.estimator.predict(X)

    def predict(self, X) -> list:
        return [self.class_labels[i] for i in self.predict_indices(X)]

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.spec.kind,
            "hyperparams": self.spec.hyperparams,
            "seed": self.spec.seed,
            "class_labels": list(self.class_labels),
            "feature_dim": self.feature_dim,
            "params": self.estimator.get_state(),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> TrainedModel:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"model file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
            raise ValidationError("not a demopred model file")
        if doc.get("version") != MODEL_VERSION:
            raise ValidationError(f"unsupported model version {doc.get('version')!r}")
        spec = ClassifierSpec(doc["kind"], doc["hyperparams"], doc["seed"])
        estimator = _make_estimator(spec)
        estimator.set_state(doc["params"])
        return cls(spec, tuple(doc["class_labels"]), doc["feature_dim"], estimator)


def _ordered_classes(labels: Sequence, target: str | None) -> tuple:
    present = set(labels)
    if target is not None and target in TARGET_CLASSES:
        canonical = TARGET_CLASSES[target]
        if present <= set(canonical):
            return tuple(c for c in canonical if c in present)
    return tuple(sorted(present))


def fit(
    spec: ClassifierSpec,
    X,
    labels: Sequence,
    *,
    target: str | None = None,
    threads: int = 1,
) -> TrainedModel:
    """Train on a plain matrix and label sequence."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValidationError("training set is empty")
    if len(labels) != len(X):
        raise ValidationError(f"{len(X)} vectors but {len(labels)} labels")
    if not np.all(np.isfinite(X)):
        raise ValidationError("training features contain NaN or infinite values")
    classes = _ordered_classes(labels, target)
    if len(classes) < 2:
        raise ValidationError(f"training set has a single class {classes}; need at least two")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[label] for label in labels], dtype=np.int64)
    estimator = _make_estimator(spec, threads=threads).fit(X, y, len(classes))
    return TrainedModel(spec, classes, X.shape[1], estimator)


def train(
    spec: ClassifierSpec,
    train_set: Iterable[FeatureVector],
    target: str,
    *,
    columns: Sequence[int] | None = None,
    threads: int = 1,
) -> TrainedModel:
    """Train on feature vectors, ordered by user id first so input order never matters."""
    vectors = sorted(train_set, key=lambda v: v.user_id)
    if not vectors:
        raise ValidationError("training set is empty")
    X = np.array([v.values for v in vectors], dtype=np.float64)
    if columns is not None:
        X = X[:, list(columns)]
    labels = [v.labels.get(target) for v in vectors]
    return fit(spec, X, labels, target=target, threads=threads)


def _as_matrix(vectors) -> np.ndarray:
    vectors = list(vectors) if not isinstance(vectors, np.ndarray) else vectors
    if len(vectors) and isinstance(vectors[0], FeatureVector):
        return np.array([v.values for v in vectors], dtype=np.float64)
    return np.asarray(vectors, dtype=np.float64)


def predict(model: TrainedModel, vector) -> Any:
    """Label for a single vector (a FeatureVector or a sequence of floats)."""
    if isinstance(vector, FeatureVector):
        vector = vector.values
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"expected one vector, got shape {v.shape}")
    return model.predict(v.reshape(1, -1))[0]


def predict_batch(model: TrainedModel, vectors) -> list:
    X = _as_matrix(vectors)
    if len(X) == 0:
        return []
    return model.predict(X)


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(model.to_json())


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as f:
        return TrainedModel.from_json(f.read())


__all__ = [
    "KINDS",
    "KIND_NAMES",
    "DEFAULTS",
    "ClassifierSpec",
    "TrainedModel",
    "fit",
    "train",
    "predict",
    "predict_batch",
    "save_model",
    "load_model",
]
