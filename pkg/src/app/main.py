import argparse
import logging
import sys
from typing import Sequence

from logs.logger_conf import setup_logging
from src.app.core.config import Settings
from src.app.core.errors import ProtoMarginError
from src.app.handlers import register_all_commands

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proto-margin",
        description="Prototypical few-shot classification with an additive angular margin head",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_all_commands(subparsers)
    return parser


def main(argv: Sequence[str] | None = None, settings: Settings | None = None) -> int:
    settings = settings or Settings()
    args = build_parser().parse_args(argv)

    try:
        return args.handler(args, settings)
    except ProtoMarginError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"{args.command} crashed")
        print(f"unexpected error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    setup_logging(Settings.log_config, Settings.log_level)
    sys.exit(main())
