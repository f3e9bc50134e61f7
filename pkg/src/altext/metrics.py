"""Evaluation metrics over canonical label tuples."""

from __future__ import annotations

from typing import Sequence

from .corpus import LabelSpace


class MetricsError(ValueError):
    pass


def compute_metrics(
    y_true: Sequence[tuple[int, ...]],
    y_pred: Sequence[tuple[int, ...]],
    label_space: LabelSpace,
) -> dict[str, float]:
    """Accuracy, micro-F1 and macro-F1.

    Accuracy is exact-match (the full label set must agree). F1 counts are
    per-class binary; macro-F1 averages per-class F1 with 0/0 defined as 0.
    """
    if len(y_true) != len(y_pred):
        raise MetricsError("y_true and y_pred must have equal length")
    if len(y_true) == 0:
        raise MetricsError("need at least one example")
    true_sets = [set(t) for t in y_true]
    pred_sets = [set(p) for p in y_pred]
    accuracy = sum(1 for t, p in zip(true_sets, pred_sets) if t == p) / len(true_sets)
    tp_total = fp_total = fn_total = 0
    f1_per_class = []
    for c in range(label_space.n_classes):
        tp = sum(1 for t, p in zip(true_sets, pred_sets) if c in t and c in p)
        fp = sum(1 for t, p in zip(true_sets, pred_sets) if c not in t and c in p)
        fn = sum(1 for t, p in zip(true_sets, pred_sets) if c in t and c not in p)
        tp_total += tp
        fp_total += fp
        fn_total += fn
        denom = 2 * tp + fp + fn
        f1_per_class.append(2 * tp / denom if denom else 0.0)
    micro_denom = 2 * tp_total + fp_total + fn_total
    return {
        "accuracy": accuracy,
        "micro_f1": 2 * tp_total / micro_denom if micro_denom else 0.0,
        "macro_f1": sum(f1_per_class) / len(f1_per_class),
    }
