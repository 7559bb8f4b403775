import argparse

from src.app.core.config import Settings
from src.app.data.synthetic import generate_synthetic, save_synthetic_archive
from src.app.handlers.common import add_common_flags, run_config
from src.app.services.experiment import SYNTHETIC_FILE, synthetic_spec_for


def synth_command(args: argparse.Namespace, settings: Settings) -> int:
    cfg = run_config(args, require_dataset=False)
    spec = synthetic_spec_for(cfg)
    target = save_synthetic_archive(generate_synthetic(spec), cfg.out / SYNTHETIC_FILE)
    print(f"{spec.num_classes} classes x {spec.examples_per_class} vectors in R^{spec.dim}: {target}")
    return 0


def register_synth_command(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="generate a synthetic hypersphere dataset archive")
    add_common_flags(parser)
    parser.set_defaults(handler=synth_command)
