#!/usr/bin/env python3
"""Compare breaking_ties against random on the shipped synthetic corpus.

Generates the 2000-document corpus, runs both arms over 10 seeds, and prints
the mean accuracy per labeled-budget. Results land in ./results/benefit.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from altext.classification import TrainConfig
from altext.experiment import ExperimentConfig, load_curve, run_experiment
from altext.synth import write_synthetic_csv


def main():
    out_dir = os.path.join("results", "benefit")
    os.makedirs(out_dir, exist_ok=True)
    corpus = os.path.join(out_dir, "corpus.csv")
    write_synthetic_csv(corpus, 2000, 2, seed=7)
    config = ExperimentConfig(
        dataset=corpus,
        strategies=["breaking_ties", "random"],
        batch_size=25,
        seed_size=25,
        max_rounds=15,
        seeds=list(range(10)),
        train=TrainConfig(epochs=100, learning_rate=0.5),
    )
    run_experiment(config, out_dir)

    curves = {}
    for strategy in config.strategies:
        rows = load_curve(os.path.join(out_dir, strategy, "learning_curve.csv"))
        by_budget = {}
        for row in rows:
            by_budget.setdefault(row["labeled"], []).append(row["accuracy"])
        curves[strategy] = {b: float(np.mean(v)) for b, v in sorted(by_budget.items())}

    print(f"{'labels':>7} {'breaking_ties':>14} {'random':>9} {'margin':>9}")
    for budget in sorted(curves["breaking_ties"]):
        bt = curves["breaking_ties"][budget]
        rd = curves["random"][budget]
        print(f"{budget:>7} {bt:>14.4f} {rd:>9.4f} {bt - rd:>+9.4f}")
    print(f"\nfull results under {out_dir}/")


if __name__ == "__main__":
    main()
