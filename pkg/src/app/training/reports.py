import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from src.app.core.errors import CheckpointError, ProtoMarginError
from src.app.training.evaluation import EvalReport, compare_confusions

logger = logging.getLogger(__name__)

Column = tuple[int, int]


def column_label(column: Column) -> str:
    k, n = column
    return f"{k}-way {n}-shot"


@dataclass
class ComparisonTable:
    rows: list[str]
    columns: list[Column]
    cells: dict[tuple[str, Column], tuple[float, float]]

    def cell(self, row: str, column: Column) -> str:
        if (row, column) not in self.cells:
            return ""
        mean, ci95 = self.cells[(row, column)]
        return f"{mean:.2f} ± {ci95:.2f}"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["metric", *(column_label(column) for column in self.columns)])
        for row in self.rows:
            writer.writerow([row, *(self.cell(row, column) for column in self.columns)])
        return buffer.getvalue()

    def to_json(self) -> str:
        payload = {
            "columns": [column_label(column) for column in self.columns],
            "rows": [
                {
                    "metric": row,
                    "cells": {
                        column_label(column): {"mean": mean, "ci95": ci95}
                        for column in self.columns
                        if (row, column) in self.cells
                        for mean, ci95 in [self.cells[(row, column)]]
                    },
                }
                for row in self.rows
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        header = ["metric", *(column_label(column) for column in self.columns)]
        body = [[row, *(self.cell(row, column) for column in self.columns)] for row in self.rows]
        widths = [max(len(line[position]) for line in [header, *body]) for position in range(len(header))]
        return "\n".join(
            "  ".join(value.ljust(width) for value, width in zip(line, widths)).rstrip()
            for line in [header, *body]
        )


def summarize(reports: Sequence[EvalReport]) -> ComparisonTable:
    """
    Rows are metric labels in first-seen order; columns are (k, n) pairs,
    k descending then n ascending.
    """
    if not reports:
        raise ProtoMarginError("summarize needs at least one report")

    rows: list[str] = []
    columns: set[Column] = set()
    cells: dict[tuple[str, Column], tuple[float, float]] = {}
    for report in reports:
        row = str(report.config.get("metric_label", "unknown"))
        column = (int(report.config["k"]), int(report.config["n"]))
        if row not in rows:
            rows.append(row)
        columns.add(column)
        if (row, column) in cells:
            logger.warning(f"Duplicate report for {row} {column_label(column)}; keeping the later one")
        cells[(row, column)] = (report.mean_accuracy, report.ci95_halfwidth)

    ordered = sorted(columns, key=lambda column: (-column[0], column[1]))
    return ComparisonTable(rows=rows, columns=ordered, cells=cells)


def load_report(path: str | os.PathLike) -> EvalReport:
    source = Path(path)
    if not source.is_file():
        raise CheckpointError(f"report not found: {source}")
    try:
        return EvalReport.from_dict(json.loads(source.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{source}: malformed evaluation report ({e})") from e


def per_class_deltas(reports: Sequence[EvalReport], baseline: EvalReport) -> str:
    """
    CSV of per-class accuracy deltas against ``baseline``, in percentage
    points: one row per test class, one column per report's metric label.
    Classes without queries in either report get an empty cell.
    """
    if not reports:
        raise ProtoMarginError("per-class comparison needs at least one report")

    labels = [str(report.config.get("metric_label", "unknown")) for report in reports]
    deltas = [compare_confusions(report, baseline) for report in reports]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["class", *labels])
    for label in baseline.class_order:
        cells = [column[label] for column in deltas]
        writer.writerow([label, *("" if math.isnan(value) else f"{100.0 * value:+.2f}" for value in cells)])
    return buffer.getvalue()
