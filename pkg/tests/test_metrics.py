"""Metric definitions and their algebraic identities."""

import pytest

from altext.corpus import LabelSpace
from altext.metrics import MetricsError, compute_metrics
from altext.rng import Rng

SPACE = LabelSpace("single_label", ("A", "B"))


@pytest.mark.forced_example
def test_perfect_predictions_score_one():
    y = [(0,), (1,), (0,)]
    metrics = compute_metrics(y, y, SPACE)
    assert metrics == {"accuracy": 1.0, "micro_f1": 1.0, "macro_f1": 1.0}


@pytest.mark.forced_example
def test_confusion_matrix_hand_computation():
    y_true = [(0,), (0,), (1,), (1,)]
    y_pred = [(0,), (0,), (0,), (0,)]
    metrics = compute_metrics(y_true, y_pred, SPACE)
    assert metrics["accuracy"] == pytest.approx(0.5)
    # F1(A) = 2*2/(2*2+2+0) = 2/3, F1(B) = 0
    assert metrics["macro_f1"] == pytest.approx(1 / 3)
    assert metrics["micro_f1"] == pytest.approx(0.5)


@pytest.mark.forced_example
def test_single_label_micro_f1_equals_accuracy():
    rng = Rng(13)
    space = LabelSpace("single_label", ("A", "B", "C"))
    for _ in range(100):
        n = 1 + rng.randint(30)
        y_true = [(rng.randint(3),) for _ in range(n)]
        y_pred = [(rng.randint(3),) for _ in range(n)]
        metrics = compute_metrics(y_true, y_pred, space)
        assert metrics["micro_f1"] == pytest.approx(metrics["accuracy"], abs=1e-12)


def test_class_permutation_invariance():
    rng = Rng(29)
    space = LabelSpace("single_label", ("A", "B", "C"))
    y_true = [(rng.randint(3),) for _ in range(40)]
    y_pred = [(rng.randint(3),) for _ in range(40)]
    base = compute_metrics(y_true, y_pred, space)
    perm = {0: 2, 1: 0, 2: 1}
    mapped = compute_metrics(
        [(perm[t[0]],) for t in y_true], [(perm[p[0]],) for p in y_pred], space
    )
    for key in base:
        assert base[key] == pytest.approx(mapped[key])


def test_multilabel_metrics():
    space = LabelSpace("multi_label", ("A", "B"))
    y_true = [(0, 1), (0,), (), (1,)]
    y_pred = [(0,), (0,), (), (1,)]
    metrics = compute_metrics(y_true, y_pred, space)
    assert metrics["accuracy"] == pytest.approx(0.75)  # exact-match
    # class A: tp=2 fp=0 fn=0 -> 1.0; class B: tp=1 fp=0 fn=1 -> 2/3
    assert metrics["macro_f1"] == pytest.approx((1.0 + 2 / 3) / 2)
    assert metrics["micro_f1"] == pytest.approx(2 * 3 / (2 * 3 + 0 + 1))


def test_length_mismatch_errors():
    with pytest.raises(MetricsError):
        compute_metrics([(0,)], [(0,), (1,)], SPACE)
    with pytest.raises(MetricsError):
        compute_metrics([], [], SPACE)
