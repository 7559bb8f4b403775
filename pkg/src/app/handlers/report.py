import argparse
import logging
from pathlib import Path

from src.app.common.atomic_files import write_text_atomic
from src.app.core.config import Settings
from src.app.services.experiment import PER_CLASS_DELTAS, SUMMARY_CSV, SUMMARY_JSON
from src.app.training.reports import load_report, per_class_deltas, summarize

logger = logging.getLogger(__name__)


def report_command(args: argparse.Namespace, settings: Settings) -> int:
    reports = [load_report(path) for path in args.reports]
    table = summarize(reports)
    print(table.to_text())

    deltas = None
    if args.baseline:
        deltas = per_class_deltas(reports, load_report(args.baseline))
        print()
        print(deltas, end="")

    if args.out:
        out = Path(args.out)
        write_text_atomic(out / SUMMARY_CSV, table.to_csv())
        write_text_atomic(out / SUMMARY_JSON, table.to_json())
        if deltas is not None:
            write_text_atomic(out / PER_CLASS_DELTAS, deltas)
        logger.info(f"Summary written to {out}")
    return 0


def register_report_command(subparsers) -> None:
    parser = subparsers.add_parser("report", help="comparison table over existing evaluation reports")
    parser.add_argument("reports", nargs="+", help="eval_report.json files")
    parser.add_argument("--baseline", help="eval_report.json to compare per-class accuracy against")
    parser.add_argument("--out", help="also write summary.csv, summary.json and per_class_deltas.csv here")
    parser.set_defaults(handler=report_command)
