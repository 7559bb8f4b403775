import argparse
from typing import Any

from src.app.core.config import RunConfig, parse_config

# argparse dest -> RunConfig key
_FLAG_KEYS = {
    "seed": "seed",
    "out": "out",
    "metric": "metric",
    "margin": "margin",
    "n": "n",
    "k": "k",
    "q": "q",
    "epochs": "epochs",
    "episodes": "episodes_per_epoch",
    "eval_episodes": "eval_episodes",
    "margins": "margins",
    "checkpoint": "checkpoint",
}


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="run seed; every random stream is derived from it")
    parser.add_argument("--out", help="output directory for artifacts")
    parser.add_argument("--metric", choices=("euclidean", "cosine", "aam"))
    parser.add_argument("--margin", type=float, help="additive angular margin in radians (aam)")
    parser.add_argument("--n", type=int, help="shots per class")
    parser.add_argument("--k", type=int, help="classes per episode")
    parser.add_argument("--q", type=int, help="queries per class")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--episodes", type=int, help="training episodes per epoch")
    parser.add_argument("--eval-episodes", type=int, help="test episodes")


def flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {key: getattr(args, dest) for dest, key in _FLAG_KEYS.items() if getattr(args, dest, None) is not None}


def run_config(args: argparse.Namespace, require_dataset: bool = True) -> RunConfig:
    return parse_config(args.config, flag_overrides(args), require_dataset=require_dataset)
