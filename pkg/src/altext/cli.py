"""Command-line entry points: `al-exp` (experiments) and `al-serve` (annotation)."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .classification import TrainConfig
from .corpus import CorpusError, load_dataset
from .experiment import ConfigError, ExperimentConfig, run_experiment
from .loop import LoopConfig, LoopError
from .strategies import StrategyError
from .synth import write_synthetic_csv


def exp_main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="al-exp", description="Active learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, help="path to the experiment config JSON")
    run.add_argument("--out", required=True, help="output directory")

    synth = sub.add_parser("synth", help="generate a synthetic topic-word corpus")
    synth.add_argument("--docs", type=int, required=True)
    synth.add_argument("--classes", type=int, required=True)
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--out", required=True, help="output CSV path")

    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            write_synthetic_csv(args.out, args.docs, args.classes, args.seed)
            print(f"wrote {args.docs} documents to {args.out}")
            return 0
        with open(args.config, encoding="utf-8") as fh:
            config = ExperimentConfig.from_json(json.load(fh))
        summary = run_experiment(config, args.out)
        for strategy, stats in summary["strategies"].items():
            finals = " ".join(f"{m}={v:.4f}" for m, v in stats["final"].items())
            print(f"{strategy}: {finals} (mean rounds {stats['mean_rounds_to_stop']:.1f})")
        return 0
    except (ConfigError, CorpusError, LoopError, StrategyError, OSError, json.JSONDecodeError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


def serve_main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="al-serve", description="Annotation service")
    parser.add_argument("--dataset", required=True, help="CSV dataset (may be fully unlabeled)")
    parser.add_argument("--format", default="csv", choices=["csv", "jsonl"])
    parser.add_argument("--strategy", default="breaking_ties")
    parser.add_argument("--classifier", default="sparse_linear")
    parser.add_argument("--batch-size", type=int, default=10)
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--session-dir", required=True)
    parser.add_argument("--classes", default=None, help="comma-separated class names (required when the dataset has no labels)")
    parser.add_argument("--multi-label", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-rounds", type=int, default=1000)
    parser.add_argument("--stopping", default="kappa_average", choices=["kappa_average", "classification_change", "none"])
    parser.add_argument("--ui-dir", default=None, help="directory with the built UI bundle")
    args = parser.parse_args(argv)

    try:
        class_names = args.classes.split(",") if args.classes else None
        mode = "multi_label" if args.multi_label else None
        dataset = load_dataset(args.dataset, format=args.format, class_names=class_names, mode=mode)
        stopping = [] if args.stopping == "none" else [{"name": args.stopping}]
        config = LoopConfig(
            classifier=args.classifier,
            train=TrainConfig(seed=args.seed),
            strategy=args.strategy,
            stopping=stopping,
            batch_size=args.batch_size,
            max_rounds=args.max_rounds,
            seed=args.seed,
        )
    except (CorpusError, LoopError, StrategyError, OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    from .service import create_app
    import uvicorn

    app = create_app(dataset, config, args.session_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(exp_main())
