import argparse
import asyncio

from src.app.core.config import Settings
from src.app.handlers.common import add_common_flags, run_config
from src.app.services.experiment import prepare_data
from src.app.services.sweeper import MarginSweeper


def sweep_command(args: argparse.Namespace, settings: Settings) -> int:
    cfg = run_config(args)
    data = prepare_data(cfg)
    sweeper = MarginSweeper(cfg, data, threads=settings.threads)
    table = asyncio.run(sweeper.sweep())
    print(table.to_text())
    return 0


def register_sweep_command(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="train and evaluate the aam head for each margin")
    add_common_flags(parser)
    parser.add_argument("--margins", help="comma separated margins in radians, e.g. 0,0.25,0.5")
    parser.set_defaults(handler=sweep_command)
