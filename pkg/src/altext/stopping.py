"""Stopping criteria: agreement-based and prediction-change-based.

Both criteria watch the model's predictions on a fixed stop set across
retrains. They are pure functions of the recorded history plus their
parameters, so any decision can be replayed offline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import MULTI_LABEL


class StoppingError(ValueError):
    """Mismatched prediction vectors or bad criterion parameters."""


@dataclass(frozen=True)
class StopDecision:
    should_stop: bool
    value: float
    criterion: str


def cohens_kappa(y_prev: Sequence, y_cur: Sequence) -> float:
    """Chance-corrected agreement between two label vectors.

    kappa = (p_o - p_e) / (1 - p_e) with p_o the observed agreement and p_e
    the chance agreement from the two marginal label distributions. The
    degenerate case p_e = 1 is defined as total agreement, kappa = 1.
    """
    if len(y_prev) != len(y_cur):
        raise StoppingError("prediction vectors must have equal length")
    n = len(y_prev)
    if n == 0:
        raise StoppingError("prediction vectors must be non-empty")
    p_o = sum(1 for a, b in zip(y_prev, y_cur) if a == b) / n
    values = set(y_prev) | set(y_cur)
    p_e = 0.0
    for v in values:
        p_e += (sum(1 for a in y_prev if a == v) / n) * (sum(1 for b in y_cur if b == v) / n)
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def multilabel_kappa(y_prev: Sequence[tuple], y_cur: Sequence[tuple], n_classes: int) -> float:
    """Per-class kappa on binary membership indicators, averaged."""
    if len(y_prev) != len(y_cur):
        raise StoppingError("prediction vectors must have equal length")
    total = 0.0
    for c in range(n_classes):
        a = [c in lab for lab in y_prev]
        b = [c in lab for lab in y_cur]
        total += cohens_kappa(a, b)
    return total / n_classes


def prediction_kappa(y_prev: Sequence[tuple], y_cur: Sequence[tuple], label_mode: str, n_classes: int) -> float:
    if label_mode == MULTI_LABEL:
        return multilabel_kappa(y_prev, y_cur, n_classes)
    return cohens_kappa(y_prev, y_cur)


def kappa_average_should_stop(
    kappa_history: Sequence[float], window: int = 3, threshold: float = 0.99
) -> StopDecision:
    """Stop once the mean of the last `window` kappas reaches the threshold."""
    if len(kappa_history) < window:
        value = sum(kappa_history) / len(kappa_history) if kappa_history else float("nan")
        return StopDecision(False, value, "kappa_average")
    mean = sum(kappa_history[-window:]) / window
    return StopDecision(mean >= threshold, mean, "kappa_average")


def classification_change_should_stop(
    y_prev: Sequence[tuple],
    y_cur: Sequence[tuple],
    epsilon: float = 0.005,
    window: int = 2,
    state: int = 0,
) -> tuple[StopDecision, int]:
    """Stop after `window` consecutive retrains change fewer than `epsilon`
    of the stop-set predictions. Returns the decision and the new streak."""
    if len(y_prev) != len(y_cur):
        raise StoppingError("prediction vectors must have equal length")
    if len(y_prev) == 0:
        raise StoppingError("prediction vectors must be non-empty")
    rate = sum(1 for a, b in zip(y_prev, y_cur) if a != b) / len(y_prev)
    streak = state + 1 if rate < epsilon else 0
    return StopDecision(streak >= window, rate, "classification_change"), streak


class KappaAverage:
    """Windowed-mean kappa criterion with its recorded history."""

    name = "kappa_average"

    def __init__(self, window: int = 3, kappa: float = 0.99):
        if window < 1:
            raise StoppingError("window must be at least 1")
        self.window = window
        self.threshold = kappa
        self.history: list[float] = []

    def update(self, y_prev, y_cur, label_mode: str, n_classes: int) -> StopDecision:
        self.history.append(prediction_kappa(y_prev, y_cur, label_mode, n_classes))
        return self.evaluate()

    def evaluate(self) -> StopDecision:
        return kappa_average_should_stop(self.history, self.window, self.threshold)

    def to_state(self) -> dict:
        return {"history": self.history}

    def restore(self, state: dict) -> None:
        self.history = [float(x) for x in state["history"]]

    def params(self) -> dict:
        return {"name": self.name, "window": self.window, "kappa": self.threshold}


class ClassificationChange:
    """Consecutive low-change criterion over stop-set predictions."""

    name = "classification_change"

    def __init__(self, epsilon: float = 0.005, window: int = 2):
        if window < 1:
            raise StoppingError("window must be at least 1")
        self.epsilon = epsilon
        self.window = window
        self.streak = 0
        self.last_rate = float("nan")

    def update(self, y_prev, y_cur, label_mode: str, n_classes: int) -> StopDecision:
        decision, self.streak = classification_change_should_stop(
            y_prev, y_cur, self.epsilon, self.window, self.streak
        )
        self.last_rate = decision.value
        return decision

    def evaluate(self) -> StopDecision:
        return StopDecision(self.streak >= self.window, self.last_rate, self.name)

    def to_state(self) -> dict:
        return {"streak": self.streak, "last_rate": self.last_rate}

    def restore(self, state: dict) -> None:
        self.streak = int(state["streak"])
        self.last_rate = float(state["last_rate"])

    def params(self) -> dict:
        return {"name": self.name, "epsilon": self.epsilon, "window": self.window}


def build_criterion(config: dict):
    """Criterion from a config mapping, e.g. {"name": "kappa_average", "window": 3}."""
    kind = config.get("name")
    args = {k: v for k, v in config.items() if k != "name"}
    if kind == KappaAverage.name:
        return KappaAverage(**args)
    if kind == ClassificationChange.name:
        return ClassificationChange(**args)
    raise StoppingError(f"unknown stopping criterion {kind!r}")
