"""Pool-based active learning orchestration.

The learner is a two-phase state machine: ``awaiting_query`` (call
:meth:`ActiveLearner.query` to draw a batch) and ``awaiting_labels`` (call
:meth:`ActiveLearner.update` with labels for exactly that batch, which
retrains from scratch and advances the round counter). Every stochastic
choice flows through one seeded stream, and :meth:`save` / :func:`load`
round-trip the complete state, so a resumed session continues the exact
trajectory an uninterrupted run would have produced.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .classification import (
    TrainConfig,
    create_classifier,
    load_checkpoint,
    save_checkpoint,
    CLASSIFIERS,
)
from .corpus import Dataset, PoolState
from .rng import Rng
from .stopping import StopDecision, build_criterion
from .strategies import QueryRequest, resolve_strategy, run_query, validate_strategy

AWAITING_QUERY = "awaiting_query"
AWAITING_LABELS = "awaiting_labels"

MANIFEST_VERSION = 1


class LoopError(ValueError):
    """Illegal phase transition, bad batch, or corrupt session state."""


@dataclass
class LoopConfig:
    classifier: str = "sparse_linear"
    train: TrainConfig = field(default_factory=TrainConfig)
    strategy: str = "random"
    strategy_params: dict = field(default_factory=dict)
    stopping: list = field(default_factory=list)
    batch_size: int = 10
    max_rounds: int = 50
    seed: int = 0
    stop_set_size: int = 1000
    classifier_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.batch_size < 1:
            raise LoopError("batch_size must be at least 1")
        if self.max_rounds < 1:
            raise LoopError("max_rounds must be at least 1")
        if self.classifier not in CLASSIFIERS:
            raise LoopError(f"unknown classifier {self.classifier!r}")
        name, extra = resolve_strategy(self.strategy)
        self.strategy = name
        merged = dict(extra)
        merged.update(self.strategy_params)
        self.strategy_params = merged
        capabilities = CLASSIFIERS[self.classifier].capabilities
        from .strategies import STRATEGIES

        if not capabilities.provides(STRATEGIES[name].requires):
            raise LoopError(
                f"classifier {self.classifier!r} lacks a capability required by {name!r}"
            )
        for crit in self.stopping:
            build_criterion(crit)

    def to_json(self) -> dict:
        return {
            "classifier": self.classifier,
            "train": self.train.to_json(),
            "strategy": self.strategy,
            "strategy_params": self.strategy_params,
            "stopping": self.stopping,
            "batch_size": self.batch_size,
            "max_rounds": self.max_rounds,
            "seed": self.seed,
            "stop_set_size": self.stop_set_size,
            "classifier_params": self.classifier_params,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LoopConfig":
        obj = dict(obj)
        obj["train"] = TrainConfig.from_json(obj.get("train", {}))
        return cls(**obj)


@dataclass
class RoundRecord:
    round: int
    queried_ids: list[int]
    labels: dict[int, tuple[int, ...]]
    stopset_digest: str
    stopping: list[dict]
    metrics: Optional[dict]
    wall_clock: float

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "queried_ids": self.queried_ids,
            "labels": {str(i): list(lab) for i, lab in self.labels.items()},
            "stopset_digest": self.stopset_digest,
            "stopping": self.stopping,
            "metrics": self.metrics,
            "wall_clock": self.wall_clock,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RoundRecord":
        return cls(
            round=int(obj["round"]),
            queried_ids=[int(i) for i in obj["queried_ids"]],
            labels={int(i): tuple(lab) for i, lab in obj["labels"].items()},
            stopset_digest=obj["stopset_digest"],
            stopping=obj["stopping"],
            metrics=obj.get("metrics"),
            wall_clock=float(obj["wall_clock"]),
        )


def _decision_json(decision: StopDecision) -> dict:
    value = decision.value
    return {
        "name": decision.criterion,
        "value": None if (isinstance(value, float) and math.isnan(value)) else value,
        "should_stop": decision.should_stop,
    }


def _digest_predictions(predictions: Sequence[tuple[int, ...]]) -> str:
    blob = json.dumps([list(p) for p in predictions])
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _canonical_label(label_space, value) -> tuple[int, ...]:
    if isinstance(value, int):
        value = (value,)
    return label_space.canonical(value)


class ActiveLearner:
    """One pool-based active learning loop over a fixed dataset."""

    def __init__(
        self,
        dataset: Dataset,
        seed_indices: Sequence[int],
        seed_labels: Sequence,
        config: LoopConfig,
        pool_indices: Optional[Sequence[int]] = None,
        metrics_fn: Optional[Callable] = None,
    ):
        if len(seed_indices) == 0:
            raise LoopError("seed set must be non-empty")
        if len(set(seed_indices)) != len(seed_indices):
            raise LoopError("duplicate index in seed set")
        if len(seed_indices) != len(seed_labels):
            raise LoopError("seed indices and labels must align")
        self.dataset = dataset
        self.config = config
        self.metrics_fn = metrics_fn
        universe = list(range(dataset.n)) if pool_indices is None else sorted(set(pool_indices))
        universe_set = set(universe)
        for i in seed_indices:
            if i not in universe_set:
                raise LoopError(f"seed index {i} is outside the pool")
        validate_strategy(
            config.strategy,
            CLASSIFIERS[config.classifier].capabilities,
            dataset.label_space.mode,
        )
        self.labels: dict[int, tuple[int, ...]] = {}
        for i, lab in zip(seed_indices, seed_labels):
            self.labels[int(i)] = _canonical_label(dataset.label_space, lab)
        self.pools = PoolState(
            labeled=list(self.labels),
            unlabeled=[i for i in universe if i not in self.labels],
        )
        self.pool_indices = universe
        self.rng = Rng(config.seed)
        stop_n = min(config.stop_set_size, len(universe))
        self.stopset = sorted(universe[p] for p in self.rng.sample_indices(len(universe), stop_n))
        self.criteria = [build_criterion(c) for c in config.stopping]
        self.history: list[RoundRecord] = []
        self.phase = AWAITING_QUERY
        self.pending: list[int] = []
        self.rounds_completed = 0
        self.model = None
        self._stopset_prev: Optional[list[tuple[int, ...]]] = None
        self._retrain()
        self._record_round(queried=list(seed_indices), stopping=[])

    # -- internals -------------------------------------------------------

    def _retrain(self) -> float:
        started = time.perf_counter()
        model = create_classifier(
            self.config.classifier,
            self.dataset.label_space,
            self.config.train,
            **self.config.classifier_params,
        )
        labeled = self.pools.labeled
        model.fit(self.dataset, labeled, [self.labels[i] for i in labeled])
        self.model = model
        self._stopset_cur = [tuple(p) for p in model.predict(self.dataset, self.stopset)]
        return time.perf_counter() - started

    def _record_round(self, queried: list[int], stopping: list[dict], wall: float = 0.0) -> RoundRecord:
        record = RoundRecord(
            round=self.rounds_completed,
            queried_ids=[int(i) for i in queried],
            labels={int(i): self.labels[int(i)] for i in queried},
            stopset_digest=_digest_predictions(self._stopset_cur),
            stopping=stopping,
            metrics=self.metrics_fn(self.model) if self.metrics_fn else None,
            wall_clock=wall,
        )
        self.history.append(record)
        self._stopset_prev = self._stopset_cur
        return record

    # -- the loop surface --------------------------------------------------

    def query(self) -> list[int]:
        """Select the next batch; legal only between completed rounds."""
        if self.phase != AWAITING_QUERY:
            raise LoopError("pending batch: submit labels before querying again")
        if self.pools.n_unlabeled == 0:
            raise LoopError("pool exhausted")
        k = min(self.config.batch_size, self.pools.n_unlabeled)
        request = QueryRequest(
            classifier=self.model,
            dataset=self.dataset,
            pools=self.pools,
            k=k,
            rng=self.rng,
            params=self.config.strategy_params,
        )
        result = run_query(self.config.strategy, request)
        self.pending = list(result.selected)
        self.phase = AWAITING_LABELS
        return list(self.pending)

    def update(self, labels: dict) -> RoundRecord:
        """Apply labels for exactly the pending batch, then retrain."""
        if self.phase != AWAITING_LABELS:
            raise LoopError("no pending batch: call query() first")
        provided = {int(i) for i in labels}
        pending = set(self.pending)
        if provided != pending:
            missing = sorted(pending - provided)
            extra = sorted(provided - pending)
            raise LoopError(f"label map must cover the pending batch exactly (missing {missing}, extra {extra})")
        canonical = {
            int(i): _canonical_label(self.dataset.label_space, lab) for i, lab in labels.items()
        }
        self.labels.update(canonical)
        self.pools.move_to_labeled(self.pending)
        wall = self._retrain()
        stopping = []
        for criterion in self.criteria:
            decision = criterion.update(
                self._stopset_prev,
                self._stopset_cur,
                self.dataset.label_space.mode,
                self.dataset.label_space.n_classes,
            )
            stopping.append(_decision_json(decision))
        self.rounds_completed += 1
        queried = list(self.pending)
        self.pending = []
        self.phase = AWAITING_QUERY
        return self._record_round(queried=queried, stopping=stopping, wall=wall)

    def should_stop(self) -> StopDecision:
        """OR over the configured criteria, with max_rounds always implied."""
        if self.rounds_completed >= self.config.max_rounds:
            return StopDecision(True, float(self.rounds_completed), "max_rounds")
        for criterion in self.criteria:
            decision = criterion.evaluate()
            if decision.should_stop:
                return decision
        if self.criteria:
            return self.criteria[0].evaluate()
        return StopDecision(False, float(self.rounds_completed), "max_rounds")

    def history_digest(self) -> str:
        """Digest of the deterministic trajectory (wall clock excluded)."""
        rows = []
        for rec in self.history:
            row = rec.to_json()
            row.pop("wall_clock")
            row.pop("metrics")
            rows.append(row)
        return hashlib.sha256(json.dumps(rows, sort_keys=True).encode("utf-8")).hexdigest()

    # -- persistence --------------------------------------------------------

    def save(self, session_dir: str) -> None:
        os.makedirs(session_dir, exist_ok=True)
        save_checkpoint(self.model, os.path.join(session_dir, "model.npz"))
        _write_atomic(
            os.path.join(session_dir, "pools.json"),
            json.dumps(
                {
                    "pools": self.pools.to_json(),
                    "labels": {str(i): list(lab) for i, lab in self.labels.items()},
                    "pool_indices": self.pool_indices,
                }
            ),
        )
        with open(os.path.join(session_dir, "history.jsonl.tmp"), "w", encoding="utf-8") as fh:
            for rec in self.history:
                fh.write(json.dumps(rec.to_json(), sort_keys=True))
                fh.write("\n")
        os.replace(
            os.path.join(session_dir, "history.jsonl.tmp"),
            os.path.join(session_dir, "history.jsonl"),
        )
        _write_atomic(
            os.path.join(session_dir, "rng.json"), json.dumps({"state": self.rng.state})
        )
        _write_atomic(
            os.path.join(session_dir, "stopset.json"),
            json.dumps(
                {
                    "indices": self.stopset,
                    "previous": [list(p) for p in (self._stopset_prev or [])],
                }
            ),
        )
        manifest = {
            "format_version": MANIFEST_VERSION,
            "config": self.config.to_json(),
            "phase": self.phase,
            "pending": self.pending,
            "rounds_completed": self.rounds_completed,
            "stopping_state": [c.to_state() for c in self.criteria],
            "dataset": {
                "n": self.dataset.n,
                "vocab_hash": self.dataset.vocab_hash,
                "mode": self.dataset.label_space.mode,
                "class_names": list(self.dataset.label_space.class_names),
            },
        }
        _write_atomic(os.path.join(session_dir, "manifest.json"), json.dumps(manifest, indent=2))


def _write_atomic(path: str, payload: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _manifest_field(manifest: dict, key: str):
    if key not in manifest:
        raise LoopError(f"corrupt manifest: missing field {key!r}")
    return manifest[key]


def load(session_dir: str, dataset: Dataset, metrics_fn: Optional[Callable] = None) -> ActiveLearner:
    """Restore a saved learner against the same dataset."""
    with open(os.path.join(session_dir, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    version = _manifest_field(manifest, "format_version")
    if version != MANIFEST_VERSION:
        raise LoopError(f"corrupt manifest: unsupported format_version {version!r}")
    config = LoopConfig.from_json(_manifest_field(manifest, "config"))
    described = _manifest_field(manifest, "dataset")
    if described.get("vocab_hash") != dataset.vocab_hash or described.get("n") != dataset.n:
        raise LoopError("corrupt manifest: dataset does not match field vocab_hash/n")

    with open(os.path.join(session_dir, "pools.json"), encoding="utf-8") as fh:
        pools_blob = json.load(fh)
    with open(os.path.join(session_dir, "rng.json"), encoding="utf-8") as fh:
        rng_blob = json.load(fh)
    with open(os.path.join(session_dir, "stopset.json"), encoding="utf-8") as fh:
        stopset_blob = json.load(fh)

    learner = ActiveLearner.__new__(ActiveLearner)
    learner.dataset = dataset
    learner.config = config
    learner.metrics_fn = metrics_fn
    learner.labels = {
        int(i): tuple(lab) for i, lab in pools_blob["labels"].items()
    }
    learner.pools = PoolState.from_json(pools_blob["pools"])
    learner.pool_indices = [int(i) for i in pools_blob["pool_indices"]]
    learner.rng = Rng(0)
    learner.rng.set_state(rng_blob["state"])
    learner.stopset = [int(i) for i in stopset_blob["indices"]]
    learner.criteria = [build_criterion(c) for c in config.stopping]
    for criterion, state in zip(learner.criteria, _manifest_field(manifest, "stopping_state")):
        criterion.restore(state)
    learner.phase = _manifest_field(manifest, "phase")
    if learner.phase not in (AWAITING_QUERY, AWAITING_LABELS):
        raise LoopError(f"corrupt manifest: bad field phase {learner.phase!r}")
    learner.pending = [int(i) for i in _manifest_field(manifest, "pending")]
    learner.rounds_completed = int(_manifest_field(manifest, "rounds_completed"))
    learner.model = load_checkpoint(os.path.join(session_dir, "model.npz"))
    if learner.model.vocab_hash != dataset.vocab_hash:
        raise LoopError("corrupt manifest: model checkpoint does not match dataset")
    learner._stopset_cur = [tuple(p) for p in learner.model.predict(dataset, learner.stopset)]
    previous = [tuple(int(c) for c in p) for p in stopset_blob["previous"]]
    learner._stopset_prev = previous or None
    learner.history = []
    with open(os.path.join(session_dir, "history.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                learner.history.append(RoundRecord.from_json(json.loads(line)))
    return learner
