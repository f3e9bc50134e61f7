"""Trainable text classifiers behind a uniform capability contract.

Two classifiers cover the capabilities the query strategies need:

* ``SparseLinear``: softmax (single-label) or per-class sigmoid (multi-label)
  regression on the TF-IDF view. Its dense embedding is a fixed, seeded
  random projection of the TF-IDF row; its gradient embedding is the exact
  loss gradient of the final (and only) linear layer, so the hidden width
  for gradients is the vocabulary size.
* ``EmbedAvgLinear``: a trainable token-embedding table, mean-pooled into a
  genuine hidden representation, with a linear head on top. It is the only
  classifier exposing per-parameter-group gradient norms.

Training is seeded minibatch SGD, always from scratch, minimizing
cross-entropy (softmax) or summed binary cross-entropy (sigmoid) plus
``l2/2 * ||W||^2`` on the head weights. Trained models are immutable:
predict/embed/gradient calls are read-only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from .corpus import Dataset, Label, LabelSpace, SINGLE_LABEL
from .rng import Rng


class ClassifierError(ValueError):
    """Invalid training input, capability, or feature shape."""


@dataclass(frozen=True)
class ClassifierCapabilities:
    probabilities: bool = False
    embeddings: bool = False
    gradient_embeddings: bool = False
    per_group_gradients: bool = False

    def provides(self, required: "ClassifierCapabilities") -> bool:
        return (
            (self.probabilities or not required.probabilities)
            and (self.embeddings or not required.embeddings)
            and (self.gradient_embeddings or not required.gradient_embeddings)
            and (self.per_group_gradients or not required.per_group_gradients)
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    minibatch_size: int = 32
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.minibatch_size <= 0:
            raise ClassifierError("learning_rate, epochs and minibatch_size must be positive")
        if self.l2 < 0:
            raise ClassifierError("l2 must be non-negative")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def encode_targets(labels: Sequence[tuple[int, ...]], space: LabelSpace) -> np.ndarray:
    """Labels -> dense target matrix: one-hot rows (single) or binary rows (multi)."""
    y = np.zeros((len(labels), space.n_classes), dtype=np.float64)
    for i, lab in enumerate(labels):
        if lab is None:
            raise ClassifierError("cannot train on an unlabeled example")
        for c in lab:
            y[i, c] = 1.0
    return y


def _minibatches(n: int, batch_size: int, rng: Rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield np.array(order[start : start + batch_size], dtype=np.int64)


def _predictions_to_labels(proba: np.ndarray, mode: str) -> list[tuple[int, ...]]:
    if mode == SINGLE_LABEL:
        return [(int(c),) for c in np.argmax(proba, axis=1)]
    return [tuple(np.flatnonzero(row >= 0.5).tolist()) for row in proba]


class SparseLinear:
    """Linear model on the TF-IDF feature view."""

    id = "sparse_linear"
    capabilities = ClassifierCapabilities(
        probabilities=True, embeddings=True, gradient_embeddings=True
    )
    embed_dim = 256

    def __init__(self, label_space: LabelSpace, config: TrainConfig):
        self.label_space = label_space
        self.config = config
        self.W: Optional[np.ndarray] = None  # (V, C)
        self.b: Optional[np.ndarray] = None  # (C,)
        self.n_features: Optional[int] = None
        self.vocab_hash: Optional[str] = None
        self.loss_history: list[float] = []
        self._projection: Optional[np.ndarray] = None

    # -- training --------------------------------------------------------

    def fit(self, dataset: Dataset, indices: Sequence[int], labels: Sequence[Label]) -> "SparseLinear":
        if len(indices) == 0:
            raise ClassifierError("empty training set")
        if len(indices) != len(labels):
            raise ClassifierError("indices and labels must align")
        X = dataset.features.take(indices)
        Y = encode_targets(labels, self.label_space)
        V, C = dataset.features.n_cols, self.label_space.n_classes
        single = self.label_space.mode == SINGLE_LABEL
        cfg = self.config
        rng = Rng(cfg.seed)
        W = np.zeros((V, C), dtype=np.float64)
        b = np.zeros(C, dtype=np.float64)
        self.loss_history = []
        for _ in range(cfg.epochs):
            for batch in _minibatches(X.n_rows, cfg.minibatch_size, rng):
                Xb = X.take(batch)
                Z = Xb.dot_dense(W) + b
                P = softmax(Z) if single else sigmoid(Z)
                delta = (P - Y[batch]) / len(batch)
                grad_w = cfg.l2 * W
                Xb.add_transpose_dot(delta, grad_w)
                W -= cfg.learning_rate * grad_w
                b -= cfg.learning_rate * delta.sum(axis=0)
            self.loss_history.append(_full_loss(X.dot_dense(W) + b, Y, single, cfg.l2, W))
        self.W, self.b = W, b
        self.n_features = V
        self.vocab_hash = dataset.vocab_hash
        return self

    # -- inference ---------------------------------------------------------

    def _check_fitted(self, dataset: Dataset) -> None:
        if self.W is None:
            raise ClassifierError("model is not trained")
        if dataset.features.n_cols != self.n_features:
            raise ClassifierError(
                f"width mismatch: model expects {self.n_features} features, "
                f"dataset has {dataset.features.n_cols}"
            )

    def _rows(self, dataset: Dataset, indices: Optional[Sequence[int]]):
        if indices is None:
            return dataset.features
        return dataset.features.take(indices)

    def predict_proba(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        self._check_fitted(dataset)
        Z = self._rows(dataset, indices).dot_dense(self.W) + self.b
        return softmax(Z) if self.label_space.mode == SINGLE_LABEL else sigmoid(Z)

    def predict(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> list[tuple[int, ...]]:
        return _predictions_to_labels(self.predict_proba(dataset, indices), self.label_space.mode)

    def embed(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """Seeded random projection of the TF-IDF rows to `embed_dim`."""
        self._check_fitted(dataset)
        if self._projection is None:
            gen = np.random.default_rng(self.config.seed)
            self._projection = gen.standard_normal((self.n_features, self.embed_dim)) / math.sqrt(
                self.embed_dim
            )
        return self._rows(dataset, indices).dot_dense(self._projection)

    def gradient_embedding(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """Loss gradient of the final layer under the argmax label, flattened.

        The final layer acts on the TF-IDF row itself, so rows have width
        C * vocabulary size; keep candidate sets desk-sized or subsample.
        """
        if self.label_space.mode != SINGLE_LABEL:
            raise ClassifierError("BADGE-style gradients are single-label only")
        self._check_fitted(dataset)
        P = self.predict_proba(dataset, indices)
        residual = P.copy()
        residual[np.arange(len(P)), np.argmax(P, axis=1)] -= 1.0
        H = self._rows(dataset, indices).to_dense()
        return (residual[:, :, None] * H[:, None, :]).reshape(len(P), -1)

    def egl_gradient_norms(self, dataset, indices=None, group: str = "full") -> np.ndarray:
        raise ClassifierError("per-group gradients are not available for sparse_linear")

    # -- persistence --------------------------------------------------------

    def checkpoint_arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}

    def restore_arrays(self, arrays: dict[str, np.ndarray], meta: dict) -> None:
        self.W = arrays["W"]
        self.b = arrays["b"]
        self.n_features = int(meta["n_features"])
        self.vocab_hash = meta["vocab_hash"]


class EmbedAvgLinear:
    """Mean-pooled trainable token embeddings with a linear head."""

    id = "embed_avg"
    capabilities = ClassifierCapabilities(
        probabilities=True,
        embeddings=True,
        gradient_embeddings=True,
        per_group_gradients=True,
    )

    def __init__(self, label_space: LabelSpace, config: TrainConfig, dim: int = 64):
        self.label_space = label_space
        self.config = config
        self.dim = int(dim)
        self.E: Optional[np.ndarray] = None  # (V, d) token embedding table
        self.W: Optional[np.ndarray] = None  # (d, C) head weights
        self.b: Optional[np.ndarray] = None  # (C,)
        self.vocab_hash: Optional[str] = None
        self.n_tokens: Optional[int] = None
        self.loss_history: list[float] = []

    # -- training --------------------------------------------------------

    def fit(self, dataset: Dataset, indices: Sequence[int], labels: Sequence[Label]) -> "EmbedAvgLinear":
        if len(indices) == 0:
            raise ClassifierError("empty training set")
        if len(indices) != len(labels):
            raise ClassifierError("indices and labels must align")
        seqs = [dataset.token_ids[i] for i in indices]
        Y = encode_targets(labels, self.label_space)
        V = len(dataset.vocabulary)
        C = self.label_space.n_classes
        single = self.label_space.mode == SINGLE_LABEL
        cfg = self.config
        rng = Rng(cfg.seed)
        gen = np.random.default_rng(rng.spawn_seed())
        E = gen.standard_normal((V, self.dim)) / math.sqrt(self.dim)
        W = np.zeros((self.dim, C), dtype=np.float64)
        b = np.zeros(C, dtype=np.float64)
        lengths = np.array([len(s) for s in seqs], dtype=np.float64)
        self.loss_history = []
        for _ in range(cfg.epochs):
            for batch in _minibatches(len(seqs), cfg.minibatch_size, rng):
                H, flat, rows = _pool_batch(E, seqs, batch, self.dim)
                Z = H @ W + b
                P = softmax(Z) if single else sigmoid(Z)
                delta = (P - Y[batch]) / len(batch)
                grad_w = H.T @ delta + cfg.l2 * W
                grad_b = delta.sum(axis=0)
                grad_h = delta @ W.T  # (B, d), uses pre-update W
                W -= cfg.learning_rate * grad_w
                b -= cfg.learning_rate * grad_b
                if len(flat):
                    scale = (1.0 / lengths[batch])[rows, None]
                    np.add.at(E, flat, -cfg.learning_rate * scale * grad_h[rows])
            H_all = _pool_all(E, seqs, self.dim)
            self.loss_history.append(_full_loss(H_all @ W + b, Y, single, cfg.l2, W))
        self.E, self.W, self.b = E, W, b
        self.n_tokens = V
        self.vocab_hash = dataset.vocab_hash
        return self

    # -- inference ---------------------------------------------------------

    def _check_fitted(self, dataset: Dataset) -> None:
        if self.W is None:
            raise ClassifierError("model is not trained")
        if len(dataset.vocabulary) != self.n_tokens:
            raise ClassifierError(
                f"width mismatch: model expects {self.n_tokens} tokens, "
                f"dataset has {len(dataset.vocabulary)}"
            )

    def _seqs(self, dataset: Dataset, indices: Optional[Sequence[int]]):
        if indices is None:
            return dataset.token_ids
        return [dataset.token_ids[i] for i in indices]

    def embed(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """Mean of the token-embedding rows; empty documents map to zero."""
        self._check_fitted(dataset)
        return _pool_all(self.E, self._seqs(dataset, indices), self.dim)

    def predict_proba(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        self._check_fitted(dataset)
        Z = self.embed(dataset, indices) @ self.W + self.b
        return softmax(Z) if self.label_space.mode == SINGLE_LABEL else sigmoid(Z)

    def predict(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> list[tuple[int, ...]]:
        return _predictions_to_labels(self.predict_proba(dataset, indices), self.label_space.mode)

    def gradient_embedding(self, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """Head-weight loss gradient under the argmax label, flattened to C*d."""
        if self.label_space.mode != SINGLE_LABEL:
            raise ClassifierError("BADGE-style gradients are single-label only")
        self._check_fitted(dataset)
        H = self.embed(dataset, indices)
        P = softmax(H @ self.W + self.b)
        residual = P.copy()
        residual[np.arange(len(P)), np.argmax(P, axis=1)] -= 1.0
        return (residual[:, :, None] * H[:, None, :]).reshape(len(P), -1)

    def egl_gradient_norms(
        self, dataset: Dataset, indices: Optional[Sequence[int]] = None, group: str = "full"
    ) -> np.ndarray:
        """Per-class gradient norms for a hypothetical label, by parameter group.

        For residual r_c = p - e_c, with h the pooled representation and T the
        token count:

        * ``softmax``: head weights and bias, ||r_c|| * sqrt(||h||^2 + 1)
        * ``word``: largest single-position embedding-row gradient,
          ||W r_c|| / T (0 when T = 0)
        * ``full``: Euclidean combination of the head group with all token
          positions, sqrt(softmax^2 + (||W r_c|| / sqrt(T))^2)

        Positions are treated as independent rows; documents that repeat a
        token share one parameter row, which these norms do not re-aggregate.
        """
        if group not in ("softmax", "word", "full"):
            raise ClassifierError(f"unknown gradient group {group!r}")
        if self.label_space.mode != SINGLE_LABEL:
            raise ClassifierError("gradient norms are single-label only")
        self._check_fitted(dataset)
        seqs = self._seqs(dataset, indices)
        H = _pool_all(self.E, seqs, self.dim)
        P = softmax(H @ self.W + self.b)
        n, C = P.shape
        T = np.array([len(s) for s in seqs], dtype=np.float64)
        # residuals[i, c, :] = p_i - e_c
        residuals = P[:, None, :] - np.eye(C)[None, :, :]
        r_norm = np.linalg.norm(residuals, axis=2)  # (n, C)
        sm = r_norm * np.sqrt((H**2).sum(axis=1) + 1.0)[:, None]
        if group == "softmax":
            return sm
        wr_norm = np.linalg.norm(residuals @ self.W.T, axis=2)  # ||W r_c||, (n, C)
        with np.errstate(divide="ignore", invalid="ignore"):
            word = np.where(T[:, None] > 0, wr_norm / T[:, None], 0.0)
            if group == "word":
                return word
            word_total_sq = np.where(T[:, None] > 0, wr_norm**2 / T[:, None], 0.0)
        return np.sqrt(sm**2 + word_total_sq)

    # -- persistence --------------------------------------------------------

    def checkpoint_arrays(self) -> dict[str, np.ndarray]:
        return {"E": self.E, "W": self.W, "b": self.b}

    def restore_arrays(self, arrays: dict[str, np.ndarray], meta: dict) -> None:
        self.E = arrays["E"]
        self.W = arrays["W"]
        self.b = arrays["b"]
        self.dim = int(meta["dim"])
        self.n_tokens = int(meta["n_tokens"])
        self.vocab_hash = meta["vocab_hash"]


def _pool_batch(E: np.ndarray, seqs: list[np.ndarray], batch: np.ndarray, dim: int):
    """Pooled rows for a batch plus the flattened token gather used by SGD."""
    flat = np.concatenate([seqs[i] for i in batch]) if len(batch) else np.empty(0, dtype=np.int64)
    counts = np.array([len(seqs[i]) for i in batch], dtype=np.int64)
    rows = np.repeat(np.arange(len(batch)), counts)
    H = np.zeros((len(batch), dim), dtype=np.float64)
    if len(flat):
        np.add.at(H, rows, E[flat])
        nz = counts > 0
        H[nz] /= counts[nz, None]
    return H, flat, rows

def _pool_all(E: np.ndarray, seqs: list[np.ndarray], dim: int) -> np.ndarray:
    H = np.zeros((len(seqs), dim), dtype=np.float64)
    for i, s in enumerate(seqs):
        if len(s):
            H[i] = E[s].mean(axis=0)
    return H


def _full_loss(Z: np.ndarray, Y: np.ndarray, single: bool, l2: float, W: np.ndarray) -> float:
    """Mean data loss plus the head regularizer, for monitoring."""
    if single:
        zmax = Z.max(axis=1, keepdims=True)
        log_p = Z - zmax - np.log(np.exp(Z - zmax).sum(axis=1, keepdims=True))
        data = -(Y * log_p).sum(axis=1).mean()
    else:
        # log(1 + exp(-|z|)) formulation keeps this stable for large logits
        data = (np.logaddexp(0.0, -np.abs(Z)) + np.maximum(Z, 0) - Z * Y).sum(axis=1).mean()
    return float(data + 0.5 * l2 * (W**2).sum())


def train_softmax_head(
    X: np.ndarray, y: np.ndarray, n_classes: int, config: TrainConfig, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded softmax regression on dense features; returns (W, b).

    Shared by strategies that need an auxiliary discriminator head.
    """
    if len(X) == 0:
        raise ClassifierError("empty training set")
    rng = Rng(seed)
    d = X.shape[1]
    W = np.zeros((d, n_classes), dtype=np.float64)
    b = np.zeros(n_classes, dtype=np.float64)
    Y = np.zeros((len(y), n_classes), dtype=np.float64)
    Y[np.arange(len(y)), y] = 1.0
    for _ in range(config.epochs):
        for batch in _minibatches(len(X), config.minibatch_size, rng):
            Z = X[batch] @ W + b
            delta = (softmax(Z) - Y[batch]) / len(batch)
            W -= config.learning_rate * (X[batch].T @ delta + config.l2 * W)
            b -= config.learning_rate * delta.sum(axis=0)
    return W, b


CLASSIFIERS = {
    SparseLinear.id: SparseLinear,
    EmbedAvgLinear.id: EmbedAvgLinear,
}


def create_classifier(classifier_id: str, label_space: LabelSpace, config: TrainConfig, **kwargs):
    try:
        cls = CLASSIFIERS[classifier_id]
    except KeyError:
        raise ClassifierError(f"unknown classifier {classifier_id!r}") from None
    return cls(label_space, config, **kwargs)


def save_checkpoint(model, path: str) -> None:
    """Single-file model checkpoint: weight arrays plus a JSON metadata blob."""
    meta = {
        "classifier": model.id,
        "label_space": {
            "mode": model.label_space.mode,
            "class_names": list(model.label_space.class_names),
        },
        "config": model.config.to_json(),
        "vocab_hash": model.vocab_hash,
    }
    if isinstance(model, SparseLinear):
        meta["n_features"] = model.n_features
    else:
        meta["dim"] = model.dim
        meta["n_tokens"] = model.n_tokens
    arrays = model.checkpoint_arrays()
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path: str):
    with np.load(path) as payload:
        meta = json.loads(bytes(payload["__meta__"]).decode("utf-8"))
        arrays = {k: payload[k] for k in payload.files if k != "__meta__"}
    space = LabelSpace(
        mode=meta["label_space"]["mode"],
        class_names=tuple(meta["label_space"]["class_names"]),
    )
    config = TrainConfig.from_json(meta["config"])
    if meta["classifier"] == SparseLinear.id:
        model = SparseLinear(space, config)
    elif meta["classifier"] == EmbedAvgLinear.id:
        model = EmbedAvgLinear(space, config, dim=meta.get("dim", 64))
    else:
        raise ClassifierError(f"unknown classifier {meta['classifier']!r} in checkpoint")
    model.restore_arrays(arrays, meta)
    return model
