"""Corpus handling: documents, label bookkeeping, TF-IDF features, pools.

A `Dataset` bundles the raw documents with two derived feature views (a
row-normalized TF-IDF matrix and per-document token-id sequences) plus the
label assignments known at load time. Datasets and feature matrices are
immutable after construction; `PoolState` is the single mutable piece and has
one logical writer.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

SINGLE_LABEL = "single_label"
MULTI_LABEL = "multi_label"

MAX_VOCAB_SIZE = 100_000

# Alphanumeric per Unicode categories: word characters minus the underscore.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

#: A label assignment: None when unlabeled, otherwise a sorted tuple of class
#: indices (exactly one entry in single-label mode, any subset in multi-label).
Label = Optional[tuple[int, ...]]


class CorpusError(ValueError):
    """Malformed dataset, label, or featurization input."""


def tokenize(text: str) -> list[str]:
    """Lowercase, then split on maximal runs of non-alphanumeric characters.

    Lowercasing happens before splitting so that case mappings which introduce
    combining marks cannot produce tokens that re-tokenize differently.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    id: int
    text: str


@dataclass(frozen=True)
class LabelSpace:
    """Fixed, ordered set of class names plus the labeling mode."""

    mode: str
    class_names: tuple[str, ...]

    def __post_init__(self):
        if self.mode not in (SINGLE_LABEL, MULTI_LABEL):
            raise CorpusError(f"unknown label mode {self.mode!r}")
        if len(self.class_names) < 2:
            raise CorpusError("a label space needs at least 2 classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise CorpusError("class names must be unique")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise CorpusError(f"unknown class {name!r}") from None

    def canonical(self, indices: Iterable[int]) -> tuple[int, ...]:
        """Validate and normalize a label to a sorted tuple of class indices."""
        out = tuple(sorted(set(int(i) for i in indices)))
        for i in out:
            if not 0 <= i < self.n_classes:
                raise CorpusError(f"class index {i} out of range")
        if self.mode == SINGLE_LABEL and len(out) != 1:
            raise CorpusError("single-label assignments need exactly one class")
        return out

    def from_names(self, names: Iterable[str]) -> tuple[int, ...]:
        return self.canonical(self.index(n) for n in names)

    def names_of(self, label: tuple[int, ...]) -> list[str]:
        return [self.class_names[i] for i in label]


class SparseFeatureMatrix:
    """Row-major sparse matrix in CSR layout (strictly increasing column
    indices per row, finite weights)."""

    __slots__ = ("indptr", "indices", "data", "n_cols", "_row_ids")

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, data: np.ndarray, n_cols: int):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        self.n_cols = int(n_cols)
        self._row_ids = None
        if not np.all(np.isfinite(self.data)):
            raise CorpusError("feature weights must be finite")

    @property
    def n_rows(self) -> int:
        return len(self.indptr) - 1

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry, cached."""
        if self._row_ids is None:
            self._row_ids = np.repeat(
                np.arange(self.n_rows, dtype=np.int64), np.diff(self.indptr)
            )
        return self._row_ids

    def take(self, rows: Sequence[int]) -> "SparseFeatureMatrix":
        """New matrix holding the given rows, in the given order."""
        rows = np.asarray(rows, dtype=np.int64)
        lengths = self.indptr[rows + 1] - self.indptr[rows]
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        data = np.empty(indptr[-1], dtype=np.float64)
        for out_i, r in enumerate(rows):
            lo, hi = self.indptr[r], self.indptr[r + 1]
            indices[indptr[out_i] : indptr[out_i + 1]] = self.indices[lo:hi]
            data[indptr[out_i] : indptr[out_i + 1]] = self.data[lo:hi]
        return SparseFeatureMatrix(indptr, indices, data, self.n_cols)

    def dot_dense(self, w: np.ndarray) -> np.ndarray:
        """Matrix product with a dense (n_cols, k) array."""
        if w.shape[0] != self.n_cols:
            raise CorpusError(
                f"width mismatch: features have {self.n_cols} columns, weights {w.shape[0]} rows"
            )
        rows = self.row_ids()
        out = np.zeros((self.n_rows, w.shape[1]), dtype=np.float64)
        gathered = w[self.indices]
        for c in range(w.shape[1]):
            out[:, c] = np.bincount(rows, weights=self.data * gathered[:, c], minlength=self.n_rows)
        return out

    def add_transpose_dot(self, delta: np.ndarray, out: np.ndarray) -> None:
        """Accumulate X.T @ delta into `out` (shape (n_cols, k))."""
        rows = self.row_ids()
        np.add.at(out, self.indices, self.data[:, None] * delta[rows])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        out[self.row_ids(), self.indices] = self.data
        return out

    def row_norms(self) -> np.ndarray:
        return np.sqrt(
            np.bincount(self.row_ids(), weights=self.data**2, minlength=self.n_rows)
        )


def _doc_tokens(docs: Sequence) -> list[list[str]]:
    out = []
    for d in docs:
        text = d.text if isinstance(d, Document) else d
        out.append(tokenize(text))
    return out


def build_vocabulary(
    docs: Sequence, min_df: int = 1, max_size: int = MAX_VOCAB_SIZE
) -> dict[str, int]:
    """Token -> column index for tokens with document frequency >= min_df.

    Surviving tokens are indexed in lexicographic order. When more than
    `max_size` tokens survive, the most document-frequent ones are kept, ties
    broken lexicographically.
    """
    token_lists = _doc_tokens(docs)
    if min_df < 1 or min_df > len(token_lists):
        raise CorpusError(f"min_df must be in [1, {len(token_lists)}]")
    df: Counter = Counter()
    for tokens in token_lists:
        df.update(set(tokens))
    kept = [t for t, c in df.items() if c >= min_df]
    if len(kept) > max_size:
        kept.sort(key=lambda t: (-df[t], t))
        kept = kept[:max_size]
    kept.sort()
    if not kept:
        raise CorpusError("no features")
    return {t: i for i, t in enumerate(kept)}


def tfidf_transform(docs: Sequence, vocabulary: dict[str, int]) -> SparseFeatureMatrix:
    """Smoothed TF-IDF with L2-normalized rows.

    weight(t, d) = count(t, d) * (ln((1 + n) / (1 + df(t))) + 1), then each
    row is scaled to unit L2 norm (all-zero rows stay zero). Tokens outside
    the vocabulary are ignored.
    """
    if not vocabulary:
        raise CorpusError("no features")
    token_lists = _doc_tokens(docs)
    n = len(token_lists)
    df = np.zeros(len(vocabulary), dtype=np.int64)
    per_doc_counts = []
    for tokens in token_lists:
        counts = Counter(vocabulary[t] for t in tokens if t in vocabulary)
        per_doc_counts.append(counts)
        for col in counts:
            df[col] += 1
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0

    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for counts in per_doc_counts:
        cols = sorted(counts)
        weights = [counts[c] * idf[c] for c in cols]
        norm = math.sqrt(sum(w * w for w in weights))
        if norm > 0:
            weights = [w / norm for w in weights]
        indices.extend(cols)
        data.extend(weights)
        indptr.append(len(indices))
    return SparseFeatureMatrix(
        np.array(indptr, dtype=np.int64),
        np.array(indices, dtype=np.int64),
        np.array(data, dtype=np.float64),
        len(vocabulary),
    )


class PoolState:
    """Disjoint labeled/unlabeled index sets, kept sorted ascending."""

    def __init__(self, labeled: Iterable[int], unlabeled: Iterable[int]):
        self._labeled = sorted(int(i) for i in labeled)
        self._unlabeled = sorted(int(i) for i in unlabeled)
        self._labeled_set = set(self._labeled)
        self._unlabeled_set = set(self._unlabeled)
        if self._labeled_set & self._unlabeled_set:
            raise CorpusError("labeled and unlabeled pools overlap")
        if len(self._labeled_set) != len(self._labeled) or len(self._unlabeled_set) != len(
            self._unlabeled
        ):
            raise CorpusError("pool indices must be unique")

    @property
    def labeled(self) -> list[int]:
        return list(self._labeled)

    @property
    def unlabeled(self) -> list[int]:
        return list(self._unlabeled)

    @property
    def n_labeled(self) -> int:
        return len(self._labeled)

    @property
    def n_unlabeled(self) -> int:
        return len(self._unlabeled)

    def is_unlabeled(self, i: int) -> bool:
        return i in self._unlabeled_set

    def is_labeled(self, i: int) -> bool:
        return i in self._labeled_set

    def move_to_labeled(self, indices: Iterable[int]) -> None:
        """Move indices from the unlabeled to the labeled side, atomically."""
        moving = [int(i) for i in indices]
        if len(set(moving)) != len(moving):
            raise CorpusError("duplicate indices in pool move")
        for i in moving:
            if i not in self._unlabeled_set:
                raise CorpusError(f"index {i} is not in the unlabeled pool")
        for i in moving:
            self._unlabeled_set.remove(i)
            self._labeled_set.add(i)
        self._labeled = sorted(self._labeled_set)
        self._unlabeled = sorted(self._unlabeled_set)

    def clone(self) -> "PoolState":
        return PoolState(self._labeled, self._unlabeled)

    def to_json(self) -> dict:
        return {"labeled": self._labeled, "unlabeled": self._unlabeled}

    @classmethod
    def from_json(cls, obj: dict) -> "PoolState":
        return cls(obj["labeled"], obj["unlabeled"])


@dataclass
class Dataset:
    """Documents plus derived feature views and load-time label assignments."""

    documents: list[Document]
    label_space: LabelSpace
    labels: list[Label]
    vocabulary: dict[str, int]
    features: SparseFeatureMatrix
    token_ids: list[np.ndarray]
    _vocab_hash: str = field(default="", repr=False)

    @property
    def n(self) -> int:
        return len(self.documents)

    @property
    def vocab_hash(self) -> str:
        if not self._vocab_hash:
            blob = "\n".join(f"{t}\t{i}" for t, i in sorted(self.vocabulary.items()))
            self._vocab_hash = hashlib.sha256(blob.encode("utf-8")).hexdigest()
        return self._vocab_hash

    def initial_pools(self) -> PoolState:
        labeled = [i for i, lab in enumerate(self.labels) if lab is not None]
        unlabeled = [i for i, lab in enumerate(self.labels) if lab is None]
        return PoolState(labeled, unlabeled)

    def texts(self) -> list[str]:
        return [d.text for d in self.documents]


def _infer_label_space(
    name_lists: Sequence[Optional[list[str]]],
    class_names: Optional[Sequence[str]],
    mode: Optional[str],
) -> LabelSpace:
    if mode is None:
        multi = any(cell is not None and len(cell) != 1 for cell in name_lists)
        mode = MULTI_LABEL if multi else SINGLE_LABEL
    if class_names is None:
        seen = {n for cell in name_lists if cell is not None for n in cell}
        if len(seen) < 2:
            raise CorpusError(
                "cannot infer a label space with fewer than 2 classes; pass class names explicitly"
            )
        class_names = sorted(seen)
    return LabelSpace(mode=mode, class_names=tuple(class_names))


def build_dataset(
    texts: Sequence[str],
    label_names: Sequence[Optional[list[str]]],
    class_names: Optional[Sequence[str]] = None,
    mode: Optional[str] = None,
    min_df: int = 1,
    max_vocab: int = MAX_VOCAB_SIZE,
) -> Dataset:
    """Assemble a Dataset from raw texts and per-row class-name lists."""
    if len(texts) != len(label_names):
        raise CorpusError("texts and labels must have equal length")
    space = _infer_label_space(label_names, class_names, mode)
    labels: list[Label] = []
    for row, cell in enumerate(label_names):
        if cell is None:
            labels.append(None)
        else:
            try:
                labels.append(space.from_names(cell))
            except CorpusError as e:
                raise CorpusError(f"row {row}: {e}") from None
    docs = [Document(id=i, text=t) for i, t in enumerate(texts)]
    vocabulary = build_vocabulary(docs, min_df=min_df, max_size=max_vocab)
    features = tfidf_transform(docs, vocabulary)
    token_ids = [
        np.array([vocabulary[t] for t in tokens if t in vocabulary], dtype=np.int64)
        for tokens in _doc_tokens(docs)
    ]
    return Dataset(
        documents=docs,
        label_space=space,
        labels=labels,
        vocabulary=vocabulary,
        features=features,
        token_ids=token_ids,
    )


def _parse_label_cell(cell: str, line: int) -> Optional[list[str]]:
    if cell == "":
        return None
    parts = cell.split("|")
    if any(p == "" for p in parts):
        raise CorpusError(f"line {line}: empty class name in label cell {cell!r}")
    return parts


def load_dataset(
    path: str,
    format: str = "csv",
    class_names: Optional[Sequence[str]] = None,
    mode: Optional[str] = None,
    min_df: int = 1,
) -> Dataset:
    """Load a dataset from disk.

    CSV format: header `text,label`; multi-label cells join class names with
    `|`; an empty label cell marks the row unlabeled. JSONL format: one
    `{"id":..., "text":..., "labels":[...]|null}` object per line, with dense
    ids 0..n-1. The label space is inferred from the distinct labels unless
    `class_names` / `mode` are given explicitly.
    """
    if format == "csv":
        texts, name_lists = _read_csv(path)
    elif format == "jsonl":
        texts, name_lists = _read_jsonl(path)
    else:
        raise CorpusError(f"unknown dataset format {format!r}")
    return build_dataset(texts, name_lists, class_names=class_names, mode=mode, min_df=min_df)


def _read_csv(path: str) -> tuple[list[str], list[Optional[list[str]]]]:
    texts: list[str] = []
    name_lists: list[Optional[list[str]]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError("line 1: missing header") from None
        if header != ["text", "label"]:
            raise CorpusError(f"line 1: expected header text,label, got {header}")
        for row in reader:
            line = reader.line_num
            if len(row) != 2:
                raise CorpusError(f"line {line}: expected 2 fields, got {len(row)}")
            texts.append(row[0])
            name_lists.append(_parse_label_cell(row[1], line))
    return texts, name_lists


def _read_jsonl(path: str) -> tuple[list[str], list[Optional[list[str]]]]:
    rows: list[tuple[int, str, Optional[list[str]]]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"line {line_no}: invalid JSON ({e.msg})") from None
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise CorpusError(f"line {line_no}: object needs id and text fields")
            labels = obj.get("labels")
            if labels is not None and not isinstance(labels, list):
                raise CorpusError(f"line {line_no}: labels must be a list or null")
            rows.append((int(obj["id"]), str(obj["text"]), labels))
    rows.sort(key=lambda r: r[0])
    ids = [r[0] for r in rows]
    if ids != list(range(len(rows))):
        raise CorpusError("jsonl ids must be dense 0..n-1")
    return [r[1] for r in rows], [r[2] for r in rows]


def export_csv(dataset: Dataset, path: str, labels: Optional[Sequence[Label]] = None) -> None:
    """Write `text,label` rows; multi-label sets join names with `|`.

    An empty multi-label set cannot be told apart from `unlabeled` in this
    format; use JSONL when that distinction matters.
    """
    labels = dataset.labels if labels is None else labels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", "label"])
        for doc, lab in zip(dataset.documents, labels):
            cell = "" if lab is None else "|".join(dataset.label_space.names_of(lab))
            writer.writerow([doc.text, cell])


def export_jsonl(dataset: Dataset, path: str, labels: Optional[Sequence[Label]] = None) -> None:
    labels = dataset.labels if labels is None else labels
    with open(path, "w", encoding="utf-8") as fh:
        for doc, lab in zip(dataset.documents, labels):
            names = None if lab is None else dataset.label_space.names_of(lab)
            fh.write(
                json.dumps({"id": doc.id, "text": doc.text, "labels": names}, ensure_ascii=False)
            )
            fh.write("\n")
