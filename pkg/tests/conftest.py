"""Shared fixtures: tiny datasets and a fully controllable stub classifier."""

import numpy as np
import pytest

from altext.classification import ClassifierCapabilities, TrainConfig
from altext.corpus import build_dataset


def make_dataset(n, n_classes=2, mode="single_label", labels=None):
    """Dataset of n one-token documents with a dense vocabulary.

    Documents are `tok000`, `tok001`, ... so every row has exactly one
    feature and indices are easy to reason about in strategy tests.
    """
    texts = [f"tok{i:03d}" for i in range(n)]
    class_names = [f"c{j}" for j in range(n_classes)]
    if labels is None:
        cells = [[class_names[i % n_classes]] for i in range(n)]
    else:
        cells = [None if lab is None else [class_names[c] for c in lab] for lab in labels]
    return build_dataset(texts, cells, class_names=class_names, mode=mode)


class FakeClassifier:
    """Strategy-test stub: serves pre-baked arrays indexed by dataset row."""

    id = "fake"

    def __init__(
        self,
        proba=None,
        embeddings=None,
        gradients=None,
        egl=None,
        config=None,
        capabilities=None,
    ):
        self.proba = None if proba is None else np.asarray(proba, dtype=np.float64)
        self.embeddings = (
            None if embeddings is None else np.asarray(embeddings, dtype=np.float64)
        )
        self.gradients = None if gradients is None else np.asarray(gradients, dtype=np.float64)
        self.egl = egl or {}
        self.config = config or TrainConfig(epochs=5)
        self.capabilities = capabilities or ClassifierCapabilities(
            probabilities=self.proba is not None,
            embeddings=self.embeddings is not None,
            gradient_embeddings=self.gradients is not None,
            per_group_gradients=bool(self.egl),
        )

    def _rows(self, array, indices):
        if indices is None:
            return array
        return array[np.asarray(indices, dtype=np.int64)]

    def predict_proba(self, dataset, indices=None):
        return self._rows(self.proba, indices)

    def embed(self, dataset, indices=None):
        return self._rows(self.embeddings, indices)

    def gradient_embedding(self, dataset, indices=None):
        return self._rows(self.gradients, indices)

    def egl_gradient_norms(self, dataset, indices=None, group="full"):
        return self._rows(self.egl[group], indices)


@pytest.fixture
def two_class_dataset():
    return make_dataset(8, n_classes=2)
