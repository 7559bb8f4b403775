import argparse

from src.app.core.config import Settings
from src.app.core.errors import CheckpointError
from src.app.handlers.common import add_common_flags, run_config
from src.app.models.checkpoint import load_checkpoint
from src.app.services.experiment import CHECKPOINT_FILE, CONFUSION_FILE, REPORT_FILE, evaluate_and_save, prepare_data


def eval_command(args: argparse.Namespace, settings: Settings) -> int:
    cfg = run_config(args)
    checkpoint = load_checkpoint(cfg.checkpoint or cfg.out / CHECKPOINT_FILE)
    data = prepare_data(cfg)
    expected = tuple(data.index.modality.shape)
    if tuple(checkpoint.params.backbone.input_shape) != expected:
        raise CheckpointError(
            f"checkpoint expects inputs of shape {checkpoint.params.backbone.input_shape}, dataset has {expected}"
        )
    report = evaluate_and_save(cfg, data, checkpoint.params)

    print(f"{cfg.train.metric.label} {cfg.train.k}-way {cfg.train.n}-shot: {report.format()}")
    print(f"artifacts: {cfg.out / REPORT_FILE}, {cfg.out / CONFUSION_FILE}")
    return 0


def register_eval_command(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="evaluate a checkpoint on test episodes")
    add_common_flags(parser)
    parser.add_argument("--checkpoint", help=f"checkpoint file (default: <out>/{CHECKPOINT_FILE})")
    parser.set_defaults(handler=eval_command)
