import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from demopred.errors import ValidationError
from demopred.evaluation import (
    ConfusionMatrix,
    EvalReport,
    confusion,
    majority_baseline,
    metrics,
    split,
    stratified_indices,
    summarize,
)
from demopred.features import FeatureVector, LabelSet

from . import oracles


def test_confusion_counts():
    cm = confusion(["a", "a", "b"], ["a", "b", "b"], ["a", "b"])
    assert cm.counts.tolist() == [[1, 1], [0, 1]]


def test_confusion_errors():
    with pytest.raises(ValidationError, match="predictions"):
        confusion(["a"], [], ["a"])
    with pytest.raises(ValidationError, match="not in class labels"):
        confusion(["a"], ["c"], ["a", "b"])


def test_empty_confusion_then_metrics_error():
    cm = confusion([], [], ["a", "b"])
    assert cm.counts.tolist() == [[0, 0], [0, 0]]
    with pytest.raises(ValidationError, match="empty"):
        metrics(cm)


def test_worked_example():
    r = metrics(ConfusionMatrix(("a", "b"), np.array([[2, 1], [0, 3]])))
    assert r.accuracy == pytest.approx(5 / 6, abs=1e-15)
    assert r.precision == pytest.approx((1.0, 0.75), abs=1e-15)
    assert r.recall == pytest.approx((2 / 3, 1.0), abs=1e-15)
    assert r.class_weights == (0.5, 0.5)
    assert r.f1 == pytest.approx((0.8, 6 / 7), abs=1e-15)
    assert r.weighted_precision == pytest.approx(0.875, abs=1e-15)
    assert r.weighted_f1 == pytest.approx((0.8 + 6 / 7) / 2, abs=1e-15)


def test_perfect_diagonal():
    r = metrics(ConfusionMatrix((0, 1, 2), np.diag([3, 1, 4])))
    assert r.accuracy == 1 and r.precision == r.recall == r.f1 == (1.0, 1.0, 1.0)


def test_never_predicted_class():
    r = metrics(ConfusionMatrix(("a", "b"), np.array([[2, 0], [3, 0]])))
    assert r.precision[1] == 0.0 and r.f1[1] == 0.0


def test_absent_class_has_zero_recall():
    r = metrics(ConfusionMatrix(("a", "b"), np.array([[2, 1], [0, 0]])))
    assert r.recall[1] == 0.0 and r.class_weights == (1.0, 0.0)


def test_negative_counts_rejected():
    with pytest.raises(ValidationError):
        ConfusionMatrix(("a", "b"), np.array([[1, -1], [0, 0]]))


matrices = st.integers(2, 7).flatmap(
    lambda l: hnp.arrays(np.int64, (l, l), elements=st.integers(0, 40)).filter(lambda a: a.sum() > 0)
)


@settings(max_examples=200, deadline=None)
@given(matrices, st.randoms(use_true_random=False))
def test_metrics_against_oracle_and_identities(counts, rnd):
    l = len(counts)
    r = metrics(ConfusionMatrix(tuple(range(l)), counts))
    o = oracles.metrics(counts.tolist())
    assert r.accuracy == pytest.approx(o["accuracy"], abs=1e-12)
    for name in ("precision", "recall", "f1"):
        assert getattr(r, name) == pytest.approx(o[name], abs=1e-12)
        assert getattr(r, "weighted_" + name) == pytest.approx(o["weighted_" + name], abs=1e-12)
    assert r.weighted_recall == pytest.approx(r.accuracy, abs=1e-12)
    assert sum(r.class_weights) == pytest.approx(1.0, abs=1e-12)
    # simultaneous relabelling of rows and columns
    perm = list(range(l))
    rnd.shuffle(perm)
    p = metrics(ConfusionMatrix(tuple(perm), counts[np.ix_(perm, perm)]))
    assert p.accuracy == pytest.approx(r.accuracy, abs=1e-12)
    assert p.weighted_f1 == pytest.approx(r.weighted_f1, abs=1e-12)
    assert [p.f1[perm.index(k)] for k in range(l)] == pytest.approx(list(r.f1), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abc"), min_size=1, max_size=50))
def test_self_confusion_is_diagonal(labels):
    cm = confusion(labels, labels, ["a", "b", "c"])
    assert np.count_nonzero(cm.counts - np.diag(np.diag(cm.counts))) == 0
    assert cm.total == len(labels)


def test_report_round_trip():
    r = metrics(ConfusionMatrix(("F", "M"), np.array([[2, 1], [0, 3]])))
    assert EvalReport.from_dict(r.to_dict()) == r


def test_stratified_arithmetic():
    labels = ["x"] * 50 + ["y"] * 50
    train, test = stratified_indices(labels, 0.8, 42)
    assert len(train) == 80 and len(test) == 20
    assert sum(labels[i] == "x" for i in test) == 10
    assert sorted(np.r_[train, test].tolist()) == list(range(100))


def test_split_determinism_and_seed_dependence():
    labels = ["x"] * 30 + ["y"] * 70
    a = stratified_indices(labels, 0.8, 1)
    b = stratified_indices(labels, 0.8, 1)
    c = stratified_indices(labels, 0.8, 2)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
    assert not np.array_equal(a[1], c[1])


def test_tiny_class_goes_to_train(caplog):
    train, test = stratified_indices(["a", "b", "b", "b"], 0.5, 0)
    assert 0 in train.tolist()
    assert "all placed in train" in caplog.text


def test_ratio_range():
    with pytest.raises(ValidationError):
        stratified_indices(["a", "b"], 1.0, 0)


def vec(uid, gender):
    return FeatureVector(uid, "all", (0.0,) * 29, 1, LabelSet(gender, 25, "young"))


def test_split_ignores_input_order():
    vs = [vec(i, "MF"[i % 3 == 0]) for i in range(1, 41)]
    a = split(vs, "gender", 0.8, 5)
    b = split(list(reversed(vs)), "gender", 0.8, 5)
    assert a == b


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("ab"), min_size=2, max_size=60), st.floats(0.05, 0.95), st.integers(0, 10))
def test_split_disjoint_exhaustive(labels, ratio, seed):
    train, test = stratified_indices(labels, ratio, seed)
    assert set(train.tolist()).isdisjoint(test.tolist())
    assert sorted(train.tolist() + test.tolist()) == list(range(len(labels)))
    for c in set(labels):
        n = labels.count(c)
        if n >= 2:
            assert 1 <= sum(labels[i] == c for i in test) <= n - 1


def test_majority_baseline_and_summary():
    assert majority_baseline(["M", "M", "F"], ["M", "F"]) == 0.5
    r1 = metrics(ConfusionMatrix(("a", "b"), np.array([[1, 0], [0, 1]])))
    r2 = metrics(ConfusionMatrix(("a", "b"), np.array([[1, 1], [0, 0]])))
    s = summarize([r1, r2])
    assert s["accuracy"] == {"mean": 0.75, "std": 0.25, "n": 2}
