import asyncio
import logging
from pathlib import Path
from typing import Sequence

from src.app.common.atomic_files import write_text_atomic
from src.app.core.config import RunConfig
from src.app.core.errors import ProtoMarginError
from src.app.services.experiment import (
    SUMMARY_CSV,
    SUMMARY_JSON,
    ExperimentData,
    train_then_evaluate,
    with_margin,
)
from src.app.training.evaluation import EvalReport
from src.app.training.reports import ComparisonTable, summarize

logger = logging.getLogger(__name__)


def margin_dirname(margin: float) -> str:
    return f"margin_{margin:.2f}"


class MarginSweeper:

    def __init__(
            self,
            cfg: RunConfig,
            data: ExperimentData,
            margins: Sequence[float] | None = None,
            threads: int = 1,
    ):
        """
        Train and evaluate one AAM model per margin.

        Args:
            cfg: Base run configuration; its metric is replaced per margin
            data: Dataset, class split and backbone shared by every job
            margins: Margins in radians, defaults to cfg.margins
            threads: Upper bound on concurrently running jobs
        """
        self.cfg = cfg
        self.data = data
        self.margins = list(margins if margins is not None else cfg.margins)
        self.threads = threads

        self.completed_count = 0
        self.failed_count = 0
        self.failures: list[tuple[float, BaseException]] = []

        if not self.margins:
            raise ValueError("At least one margin must be provided")
        if len(set(self.margins)) != len(self.margins):
            raise ValueError(f"Duplicate margins in {self.margins}")
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")

    def _run_margin(self, margin: float) -> EvalReport:
        out = Path(self.cfg.out) / margin_dirname(margin)
        return train_then_evaluate(with_margin(self.cfg, margin), self.data, out)

    async def _run_guarded(self, semaphore: asyncio.Semaphore, margin: float) -> EvalReport | None:
        async with semaphore:
            logger.info(f"Sweep job m={margin:.2f} started")
            try:
                report = await asyncio.to_thread(self._run_margin, margin)
            except Exception as e:
                self.failed_count += 1
                self.failures.append((margin, e))
                logger.error(f"Sweep job m={margin:.2f} failed: {e}")
                return None

            self.completed_count += 1
            logger.info(
                f"Sweep job m={margin:.2f} finished: {report.format()} "
                f"({self.completed_count}/{len(self.margins)} done)"
            )
            return report

    async def sweep(self) -> ComparisonTable:
        """
        Run every margin and write the summary table.

        Returns:
            Comparison table with one row per margin, in the given margin order
        """
        semaphore = asyncio.Semaphore(self.threads)
        logger.info(f"Sweeping margins {self.margins} with {self.threads} worker(s)")
        reports = await asyncio.gather(*(self._run_guarded(semaphore, margin) for margin in self.margins))

        logger.info(f"Sweep completed: {self.completed_count} succeeded, {self.failed_count} failed")
        if self.failures:
            margin, error = self.failures[0]
            if isinstance(error, ProtoMarginError):
                raise error
            raise RuntimeError(f"sweep job m={margin:.2f} failed: {error}") from error

        table = summarize([report for report in reports if report is not None])
        write_text_atomic(Path(self.cfg.out) / SUMMARY_CSV, table.to_csv())
        write_text_atomic(Path(self.cfg.out) / SUMMARY_JSON, table.to_json())
        return table
