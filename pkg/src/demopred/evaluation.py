"""Confusion matrices, accuracy / precision / recall / F1 and their class-weighted means.

Zero-denominator conventions: a class never predicted has precision 0, a
class absent from the actual labels has recall 0, and F1 is 0 whenever
precision + recall is 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

import numpy as np

from .errors import ValidationError
from .features import TARGET_CLASSES, FeatureVector

log = logging.getLogger(__name__)

REPORT_SCHEMA = "demopred-eval/1"
SUMMARY_METRICS = ("accuracy", "weighted_precision", "weighted_recall", "weighted_f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    class_labels: tuple
    counts: np.ndarray  # counts[i, j]: actual class i predicted as class j

    __hash__ = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        l = len(self.class_labels)
        if counts.shape != (l, l):
            raise ValidationError(f"counts must be {l}x{l}, got {counts.shape}")
        if (counts < 0).any():
            raise ValidationError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.class_labels == other.class_labels and np.array_equal(self.counts, other.counts)


def confusion(actual: Sequence[Hashable], predicted: Sequence[Hashable], class_labels: Sequence) -> ConfusionMatrix:
    if len(actual) != len(predicted):
        raise ValidationError(f"{len(actual)} actual labels but {len(predicted)} predictions")
    index = {c: i for i, c in enumerate(class_labels)}
    if len(index) != len(class_labels):
        raise ValidationError("class labels must be distinct")
    counts = np.zeros((len(index), len(index)), dtype=np.int64)
    for a, p in zip(actual, predicted):
        try:
            counts[index[a], index[p]] += 1
        except KeyError as exc:
            raise ValidationError(f"label {exc.args[0]!r} not in class labels {tuple(class_labels)}") from None
    return ConfusionMatrix(tuple(class_labels), counts)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(len(num), dtype=np.float64)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


@dataclass(frozen=True)
class EvalReport:
    confusion: ConfusionMatrix
    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    class_weights: tuple[float, ...]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    __hash__ = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "class_labels": list(self.confusion.class_labels),
            "confusion": self.confusion.counts.tolist(),
            "accuracy": self.accuracy,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "class_weights": list(self.class_weights),
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> EvalReport:
        if doc.get("schema") != REPORT_SCHEMA:
            raise ValidationError(f"unsupported report schema {doc.get('schema')!r}")
        return metrics(ConfusionMatrix(tuple(doc["class_labels"]), np.array(doc["confusion"])))


def metrics(cm: ConfusionMatrix) -> EvalReport:
    """All per-class and weighted metrics of a confusion matrix."""
    c = cm.counts.astype(np.float64)
    total = c.sum()
    if total == 0:
        raise ValidationError("confusion matrix is empty; metrics are undefined")
    diag = np.diag(c)
    actual = c.sum(axis=1)
    predicted = c.sum(axis=0)
    precision = _ratio(diag, predicted)
    recall = _ratio(diag, actual)
    f1 = _ratio(2 * precision * recall, precision + recall)
    weights = actual / total
    return EvalReport(
        confusion=cm,
        accuracy=float(diag.sum() / total),
        precision=tuple(precision.tolist()),
        recall=tuple(recall.tolist()),
        f1=tuple(f1.tolist()),
        class_weights=tuple(weights.tolist()),
        weighted_precision=float(weights @ precision),
        weighted_recall=float(weights @ recall),
        weighted_f1=float(weights @ f1),
    )


def evaluate(actual: Sequence, predicted: Sequence, class_labels: Sequence) -> EvalReport:
    return metrics(confusion(actual, predicted, class_labels))


def majority_baseline(train_labels: Sequence, test_labels: Sequence) -> float:
    """Test accuracy of always predicting the most common training label."""
    values, counts = np.unique(np.asarray(train_labels, dtype=object).astype(str), return_counts=True)
    top = values[np.argmax(counts)]
    return float(np.mean(np.asarray(test_labels, dtype=object).astype(str) == top))


def _class_order(labels: Sequence, target: str | None) -> list:
    present = set(labels)
    if target in TARGET_CLASSES and present <= set(TARGET_CLASSES[target]):
        return [c for c in TARGET_CLASSES[target] if c in present]
    return sorted(present, key=str)


def stratified_indices(
    labels: Sequence, ratio: float, seed: int, target: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Split positions 0..n-1 per class into train/test, ``ratio`` going to train.

    Classes are visited in a fixed order and share one generator, so the
    result depends only on (labels, ratio, seed). A class with fewer than two
    members goes entirely to train.
    """
    if not (isinstance(ratio, (int, float)) and 0.0 < ratio < 1.0):
        raise ValidationError(f"split ratio must be in (0, 1), got {ratio}")
    labels = list(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in _class_order(labels, target):
        members = np.array([i for i, lab in enumerate(labels) if lab == c], dtype=np.int64)
        if len(members) < 2:
            log.warning("class %r has %d sample(s); all placed in train", c, len(members))
            train.extend(members.tolist())
            continue
        shuffled = rng.permutation(members)
        n_train = min(max(math.floor(ratio * len(members) + 0.5), 1), len(members) - 1)
        train.extend(shuffled[:n_train].tolist())
        test.extend(shuffled[n_train:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


def split(
    vectors: Sequence[FeatureVector], target: str, ratio: float, seed: int
) -> tuple[list[FeatureVector], list[FeatureVector]]:
    """Stratified, seeded train/test split of feature vectors (ordered by user id)."""
    ordered = sorted(vectors, key=lambda v: v.user_id)
    train, test = stratified_indices([v.labels.get(target) for v in ordered], ratio, seed, target)
    return [ordered[i] for i in train], [ordered[i] for i in test]


def summarize(reports: Sequence[EvalReport]) -> dict[str, dict[str, float]]:
    """Mean and population standard deviation of the headline metrics across runs."""
    out = {}
    for name in SUMMARY_METRICS:
        values = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        out[name] = {"mean": float(values.mean()), "std": float(values.std()), "n": len(values)}
    return out
