# app/cli.py
import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigurationError
from app.models.experiment import PRESETS, AlgorithmKind, ExperimentConfig, ExperimentKind, FeedbackKind
from app.services.output import emit_csv, emit_trace, trace_path
from app.services.runner import run_experiment_with_traces

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minmax-oco", description="Min-max multi-objective online convex optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment and write one CSV row per (seed, T)")
    run.add_argument("--experiment", choices=[e.value for e in ExperimentKind])
    run.add_argument("--algo", choices=[a.value for a in AlgorithmKind])
    run.add_argument("--feedback", choices=[f.value for f in FeedbackKind])
    run.add_argument("--T", dest="horizons", type=int, action="append", help="Horizon; repeat for several")
    run.add_argument("--K", dest="k", type=int)
    run.add_argument("--d", dest="d", type=int)
    run.add_argument("--seeds", type=int)
    run.add_argument("--base-seed", dest="base_seed", type=int)
    run.add_argument("--out", help="CSV output path")
    run.add_argument("--trace", action="store_true", default=None, help="Write per-round traces next to --out")
    run.add_argument("--decompose", action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--no-per-slot", dest="per_slot", action="store_false", default=None)
    run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run.add_argument("--jobs", type=int, help="Worker processes (0 sizes from the machine)")
    run.add_argument("--progress", action="store_true")

    sub.add_parser("presets", help="Print the preset table as JSON")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    fields: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as f:
                fields.update(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read config {args.config}: {e}")
    experiment = args.experiment or fields.get("experiment")
    if experiment is None:
        raise ConfigurationError("Pass --experiment or a --config naming one")
    merged = {**PRESETS.get(experiment, {}), **fields}
    overrides = {
        "experiment": args.experiment,
        "algo": args.algo,
        "feedback": args.feedback,
        "horizons": args.horizons,
        "k": args.k,
        "d": args.d,
        "seeds": args.seeds,
        "base_seed": args.base_seed,
        "out": args.out,
        "trace": args.trace,
        "decompose": args.decompose,
        "per_slot": args.per_slot,
        "jobs": args.jobs,
    }
    merged.update({key: value for key, value in overrides.items() if value is not None})
    return ExperimentConfig(**merged)


def command_run(args: argparse.Namespace) -> int:
    config = load_config(args)
    out = config.out or os.path.join(settings.OUTPUT_DIR, f"{config.experiment.value}_{config.algo.value}.csv")
    logger.info(f"Running {config.experiment.value} with {config.algo.value} ({config.feedback.value}) over {config.seeds} seed(s)")
    records, traces = run_experiment_with_traces(config, progress=args.progress)
    emit_csv(records, out)
    if config.trace:
        for trace in traces:
            emit_trace(trace, trace_path(out, trace.seed, trace.T))
    return EXIT_OK


def command_presets(args: argparse.Namespace) -> int:
    print(json.dumps(PRESETS, indent=2))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = command_run if args.command == "run" else command_presets
    try:
        return handler(args)
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Run failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
