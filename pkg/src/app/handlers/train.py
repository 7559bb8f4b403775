import argparse

from src.app.core.config import Settings
from src.app.handlers.common import add_common_flags, run_config
from src.app.services.experiment import CHECKPOINT_FILE, TRACE_FILE, prepare_data, train_and_save


def train_command(args: argparse.Namespace, settings: Settings) -> int:
    cfg = run_config(args)
    data = prepare_data(cfg)
    result = train_and_save(cfg, data)

    last = result.trace.epochs[-1]
    state = result.checkpoint.state
    print(
        f"trained {len(result.trace.epochs)} epochs; final train_loss={last.train_loss:.4f} "
        f"val_loss={last.val_loss:.4f}; best epoch {state.epoch if state else '-'}"
    )
    print(f"artifacts: {cfg.out / CHECKPOINT_FILE}, {cfg.out / TRACE_FILE}")
    return 0


def register_train_command(subparsers) -> None:
    parser = subparsers.add_parser("train", help="episodic training, writes checkpoint and training trace")
    add_common_flags(parser)
    parser.set_defaults(handler=train_command)
