"""Batch experiment runner with a simulated oracle.

Ground-truth labels are revealed as the loop queries them. Each run seed
fixes one stratified test split and seed set, shared by every strategy in
the experiment, so strategy comparisons are paired. Output files per
strategy: ``learning_curve.csv`` (schema
``seed,round,labeled,accuracy,micro_f1,macro_f1``) and ``selections.jsonl``;
one ``summary.json`` at the top level.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .classification import TrainConfig
from .corpus import Dataset, SINGLE_LABEL, load_dataset
from .loop import ActiveLearner, LoopConfig
from .metrics import compute_metrics
from .rng import Rng

METRIC_COLUMNS = ["accuracy", "micro_f1", "macro_f1"]


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    dataset: str
    format: str = "csv"
    test_fraction: float = 0.2
    classifier: str = "sparse_linear"
    train: TrainConfig = field(default_factory=TrainConfig)
    strategies: list[str] = field(default_factory=lambda: ["random"])
    strategy_params: dict = field(default_factory=dict)
    batch_size: int = 25
    seed_size: int = 25
    max_rounds: int = 20
    stopping: list = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [0])
    metrics: list[str] = field(default_factory=lambda: list(METRIC_COLUMNS))
    stop_set_size: int = 1000
    classifier_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.seed_size < 1 or self.batch_size < 1 or self.max_rounds < 1:
            raise ConfigError("seed_size, batch_size and max_rounds must be positive")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if not self.seeds:
            raise ConfigError("at least one run seed is required")
        unknown = [m for m in self.metrics if m not in METRIC_COLUMNS]
        if unknown:
            raise ConfigError(f"unknown metrics {unknown}")

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("experiment config must be a JSON object")
        if "dataset" not in obj:
            raise ConfigError("missing required field 'dataset'")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        payload = dict(obj)
        try:
            if "train" in payload:
                payload["train"] = TrainConfig.from_json(payload["train"])
            return cls(**payload)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    def to_json(self) -> dict:
        out = asdict(self)
        out["train"] = self.train.to_json()
        return out


def stratified_split(
    labels: Sequence[tuple[int, ...]], fraction: float, rng: Rng, mode: str
) -> tuple[list[int], list[int]]:
    """(train, test) index lists; single-label splits are per-class."""
    n = len(labels)
    test: list[int] = []
    if mode == SINGLE_LABEL:
        by_class: dict[int, list[int]] = {}
        for i, lab in enumerate(labels):
            by_class.setdefault(lab[0], []).append(i)
        for c in sorted(by_class):
            members = by_class[c]
            rng.shuffle(members)
            n_test = min(int(round(fraction * len(members))), len(members) - 1)
            test.extend(members[:n_test])
    else:
        order = rng.permutation(n)
        n_test = min(int(round(fraction * n)), n - 1)
        test = [int(i) for i in order[:n_test]]
    test_set = set(test)
    train = [i for i in range(n) if i not in test_set]
    return train, sorted(test)


def stratified_seed_set(
    pool: Sequence[int], labels: Sequence[tuple[int, ...]], size: int, rng: Rng, mode: str
) -> list[int]:
    """Seed-set indices covering every class where possible."""
    if size > len(pool):
        raise ConfigError(f"seed_size {size} exceeds pool of {len(pool)}")
    if mode == SINGLE_LABEL:
        by_class: dict[int, list[int]] = {}
        for i in pool:
            by_class.setdefault(labels[i][0], []).append(i)
        queues = []
        for c in sorted(by_class):
            members = by_class[c]
            rng.shuffle(members)
            queues.append(members)
        picked: list[int] = []
        depth = 0
        while len(picked) < size:
            progressed = False
            for queue in queues:
                if len(picked) >= size:
                    break
                if depth < len(queue):
                    picked.append(queue[depth])
                    progressed = True
            if not progressed:
                break
            depth += 1
        return sorted(picked)
    pool = list(pool)
    picks = rng.sample_indices(len(pool), size)
    return sorted(pool[p] for p in picks)


def _require_oracle(dataset: Dataset) -> None:
    if any(lab is None for lab in dataset.labels):
        raise ConfigError("oracle requires labels: dataset has unlabeled rows")


def run_single(
    dataset: Dataset,
    strategy: str,
    run_seed: int,
    config: ExperimentConfig,
) -> dict:
    """One (strategy, seed) arm: returns rows, selections and stop metadata."""
    base = Rng(run_seed)
    mode = dataset.label_space.mode
    train_idx, test_idx = stratified_split(dataset.labels, config.test_fraction, base, mode)
    seed_idx = stratified_seed_set(train_idx, dataset.labels, config.seed_size, base, mode)
    loop_seed = base.spawn_seed()

    truth = dataset.labels

    def metrics_fn(model):
        predicted = model.predict(dataset, test_idx)
        y_true = [truth[i] for i in test_idx]
        return compute_metrics(y_true, predicted, dataset.label_space)

    loop_config = LoopConfig(
        classifier=config.classifier,
        train=config.train,
        strategy=strategy,
        strategy_params=dict(config.strategy_params),
        stopping=[dict(c) for c in config.stopping],
        batch_size=config.batch_size,
        max_rounds=config.max_rounds,
        seed=loop_seed,
        stop_set_size=config.stop_set_size,
        classifier_params=dict(config.classifier_params),
    )
    learner = ActiveLearner(
        dataset,
        seed_indices=seed_idx,
        seed_labels=[truth[i] for i in seed_idx],
        config=loop_config,
        pool_indices=train_idx,
        metrics_fn=metrics_fn,
    )
    selections = []
    while not learner.should_stop().should_stop and learner.pools.n_unlabeled > 0:
        ids = learner.query()
        learner.update({i: truth[i] for i in ids})
        selections.append({"seed": run_seed, "round": learner.rounds_completed, "ids": ids})
    rows = []
    for record in learner.history:
        rows.append(
            {
                "seed": run_seed,
                "round": record.round,
                "labeled": config.seed_size + sum(len(r.queried_ids) for r in learner.history[1 : record.round + 1]),
                **{m: record.metrics[m] for m in METRIC_COLUMNS},
            }
        )
    return {
        "rows": rows,
        "selections": selections,
        "rounds": learner.rounds_completed,
        "stop": learner.should_stop().criterion,
        "test_idx": test_idx,
        "history_digest": learner.history_digest(),
    }


def _area_under_curve(labeled: list[int], values: list[float]) -> float:
    if len(labeled) < 2:
        return float(values[0])
    span = labeled[-1] - labeled[0]
    area = np.trapezoid(values, labeled)
    return float(area / span) if span > 0 else float(values[-1])


def run_experiment(config: ExperimentConfig, out_dir: str) -> dict:
    dataset = load_dataset(config.dataset, format=config.format)
    _require_oracle(dataset)
    os.makedirs(out_dir, exist_ok=True)
    summary: dict = {"strategies": {}, "config": config.to_json()}
    for strategy in config.strategies:
        strategy_dir = os.path.join(out_dir, strategy.replace("+", "_"))
        os.makedirs(strategy_dir, exist_ok=True)
        all_rows = []
        all_selections = []
        aulc: dict[str, list[float]] = {m: [] for m in config.metrics}
        final: dict[str, list[float]] = {m: [] for m in config.metrics}
        rounds_to_stop = []
        for run_seed in config.seeds:
            arm = run_single(dataset, strategy, run_seed, config)
            all_rows.extend(arm["rows"])
            all_selections.extend(arm["selections"])
            labeled = [row["labeled"] for row in arm["rows"]]
            for m in config.metrics:
                series = [row[m] for row in arm["rows"]]
                aulc[m].append(_area_under_curve(labeled, series))
                final[m].append(series[-1])
            rounds_to_stop.append(arm["rounds"])
        _write_curve(os.path.join(strategy_dir, "learning_curve.csv"), all_rows)
        with open(os.path.join(strategy_dir, "selections.jsonl"), "w", encoding="utf-8") as fh:
            for sel in all_selections:
                fh.write(json.dumps(sel))
                fh.write("\n")
        summary["strategies"][strategy] = {
            "aulc": {m: float(np.mean(aulc[m])) for m in config.metrics},
            "final": {m: float(np.mean(final[m])) for m in config.metrics},
            "mean_rounds_to_stop": float(np.mean(rounds_to_stop)),
        }
    tmp = os.path.join(out_dir, "summary.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, "summary.json"))
    return summary


def _write_curve(path: str, rows: list[dict]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write("seed,round,labeled,accuracy,micro_f1,macro_f1\n")
        for row in rows:
            fh.write(
                f"{row['seed']},{row['round']},{row['labeled']},"
                f"{row['accuracy']!r},{row['micro_f1']!r},{row['macro_f1']!r}\n"
            )
    os.replace(tmp, path)


def load_curve(path: str) -> list[dict]:
    """Rows of a learning_curve.csv with numeric fields parsed."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            row = dict(zip(header, parts))
            rows.append(
                {
                    "seed": int(row["seed"]),
                    "round": int(row["round"]),
                    "labeled": int(row["labeled"]),
                    "accuracy": float(row["accuracy"]),
                    "micro_f1": float(row["micro_f1"]),
                    "macro_f1": float(row["macro_f1"]),
                }
            )
    return rows
