"""Synthetic topic-word corpora for experiments and tests.

Each class owns a multinomial over its exclusive topic words; all classes
share a second multinomial over common words. Documents mix the two, so
class signal exists but is diluted enough that accuracy grows gradually
with the number of labels, which is the regime where query strategies can
be told apart.
"""

from __future__ import annotations

import csv

import numpy as np

from .rng import Rng


def _zipf_cumulative(n: int) -> np.ndarray:
    weights = 1.0 / np.arange(1, n + 1)
    return np.cumsum(weights)


def _draw(cumulative: np.ndarray, rng: Rng) -> int:
    r = rng.random() * cumulative[-1]
    return min(int(np.searchsorted(cumulative, r, side="right")), len(cumulative) - 1)


def generate_synthetic(
    n_docs: int,
    n_classes: int,
    seed: int,
    topic_words: int = 30,
    shared_words: int = 60,
    doc_len: tuple[int, int] = (4, 20),
    topic_mix: float = 0.2,
) -> tuple[list[str], list[str]]:
    """Returns (texts, class names per doc); classes are near-balanced."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    rng = Rng(seed)
    topic_cum = _zipf_cumulative(topic_words)
    shared_cum = _zipf_cumulative(shared_words)
    class_names = [f"class{c}" for c in range(n_classes)]
    texts: list[str] = []
    labels: list[str] = []
    lo, hi = doc_len
    for _ in range(n_docs):
        c = rng.randint(n_classes)
        length = lo + rng.randint(hi - lo + 1)
        tokens = []
        for _ in range(length):
            if rng.random() < topic_mix:
                tokens.append(f"c{c}w{_draw(topic_cum, rng)}")
            else:
                tokens.append(f"sh{_draw(shared_cum, rng)}")
        texts.append(" ".join(tokens))
        labels.append(class_names[c])
    return texts, labels


def write_synthetic_csv(
    path: str,
    n_docs: int,
    n_classes: int,
    seed: int,
    **kwargs,
) -> None:
    texts, labels = generate_synthetic(n_docs, n_classes, seed, **kwargs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", "label"])
        for text, label in zip(texts, labels):
            writer.writerow([text, label])
