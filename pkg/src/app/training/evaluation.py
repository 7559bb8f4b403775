import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from src.app.common.seeds import derive_rng
from src.app.core.errors import EpisodeError
from src.app.data.episodes import check_episode_feasible, sample_episode
from src.app.data.index import DatasetIndex
from src.app.data.loader import ExampleLoader
from src.app.metrics.heads import MetricKind
from src.app.models.embedding import EmbeddingParams
from src.app.training.trainer import run_episode

logger = logging.getLogger(__name__)

CI95_Z = 1.96


@dataclass
class EvalReport:
    """
    Test-time summary over independent episodes. Accuracy aggregates are in
    percent; ``episode_accuracies`` keep the raw fractions.
    """

    episode_accuracies: list[float]
    mean_accuracy: float
    std_dev: float
    ci95_halfwidth: float
    confusion: np.ndarray
    class_order: list[str]
    config: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_episodes(
            cls,
            episode_accuracies: Sequence[float],
            confusion: np.ndarray,
            class_order: Sequence[str],
            config: dict[str, Any] | None = None,
    ) -> "EvalReport":
        accuracies = np.asarray(episode_accuracies, dtype=np.float64)
        std = float(accuracies.std(ddof=1)) if accuracies.size > 1 else 0.0
        return cls(
            episode_accuracies=[float(value) for value in accuracies],
            mean_accuracy=100.0 * float(accuracies.mean()),
            std_dev=100.0 * std,
            ci95_halfwidth=100.0 * CI95_Z * std / math.sqrt(accuracies.size),
            confusion=np.asarray(confusion, dtype=np.int64),
            class_order=list(class_order),
            config=dict(config or {}),
        )

    @property
    def num_episodes(self) -> int:
        return len(self.episode_accuracies)

    @property
    def overall_accuracy(self) -> float:
        """Query-level accuracy from the confusion matrix, as a fraction."""
        return float(np.trace(self.confusion)) / float(self.confusion.sum())

    @property
    def per_class_accuracy(self) -> dict[str, float]:
        """Diagonal over row sums; NaN for a class no query was drawn from."""
        totals = self.confusion.sum(axis=1)
        return {
            label: float(self.confusion[row, row]) / float(totals[row]) if totals[row] else math.nan
            for row, label in enumerate(self.class_order)
        }

    def format(self) -> str:
        return f"{self.mean_accuracy:.2f} ± {self.ci95_halfwidth:.2f}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "num_episodes": self.num_episodes,
            "mean_accuracy": self.mean_accuracy,
            "std_dev": self.std_dev,
            "ci95_halfwidth": self.ci95_halfwidth,
            "formatted": self.format(),
            "episode_accuracies": self.episode_accuracies,
            "class_order": self.class_order,
            "confusion": self.confusion.tolist(),
            "per_class_accuracy": {
                label: None if math.isnan(value) else value for label, value in self.per_class_accuracy.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "EvalReport":
        return cls(
            episode_accuracies=[float(value) for value in payload["episode_accuracies"]],
            mean_accuracy=float(payload["mean_accuracy"]),
            std_dev=float(payload["std_dev"]),
            ci95_halfwidth=float(payload["ci95_halfwidth"]),
            confusion=np.asarray(payload["confusion"], dtype=np.int64),
            class_order=list(payload["class_order"]),
            config=dict(payload.get("config", {})),
        )

    def confusion_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["true\\predicted", *self.class_order])
        for label, row in zip(self.class_order, self.confusion.tolist()):
            writer.writerow([label, *row])
        return buffer.getvalue()


def confusion_matrix(
        true_labels: Sequence[str],
        predicted_labels: Sequence[str],
        class_order: Sequence[str],
) -> np.ndarray:
    """Entry (i, j) counts queries of class i predicted as class j."""
    if len(true_labels) != len(predicted_labels):
        raise EpisodeError(f"{len(true_labels)} true labels vs {len(predicted_labels)} predictions")

    lookup = {label: position for position, label in enumerate(class_order)}
    unknown = sorted({str(label) for label in [*true_labels, *predicted_labels] if label not in lookup})
    if unknown:
        raise EpisodeError(f"labels not in class order: {unknown}")

    matrix = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
    rows = [lookup[label] for label in true_labels]
    columns = [lookup[label] for label in predicted_labels]
    np.add.at(matrix, (rows, columns), 1)
    return matrix


def evaluate(
        params: EmbeddingParams,
        index: DatasetIndex,
        test_classes: Sequence[str],
        n: int,
        k: int,
        q: int,
        num_episodes: int,
        metric: MetricKind,
        seed: int,
        loader: ExampleLoader | None = None,
        config: dict[str, Any] | None = None,
) -> EvalReport:
    """
    Margin-free evaluation over ``num_episodes`` test episodes. Episode ``i``
    draws from its own generator derived from (seed, i), so the result does
    not depend on evaluation order.

    The confusion matrix spans every test class in sorted order; it is k x k
    when the test split holds exactly k classes.
    """
    if num_episodes < 1:
        raise EpisodeError(f"num_episodes must be >= 1, got {num_episodes}")
    check_episode_feasible(index, test_classes, n, k, q)
    loader = loader or ExampleLoader(index)
    class_order = sorted(test_classes)

    accuracies: list[float] = []
    confusion = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
    for episode_index in range(num_episodes):
        rng = derive_rng(seed, "eval", episode_index)
        episode = sample_episode(index, test_classes, n, k, q, rng)
        outcome = run_episode(params, loader, episode, metric, track_gradients=False)
        accuracies.append(outcome.accuracy)
        confusion += confusion_matrix(episode.query_labels, outcome.predictions, class_order)

    echo = {
        "metric": metric.to_dict(),
        "metric_label": metric.label,
        "backbone": params.backbone.to_dict(),
        "n": n,
        "k": k,
        "q": q,
        "num_episodes": num_episodes,
        "seed": seed,
        **(config or {}),
    }
    report = EvalReport.from_episodes(accuracies, confusion, class_order, echo)
    logger.info(f"Evaluated {metric.label} {k}-way {n}-shot over {num_episodes} episodes: {report.format()}")
    return report


def compare_confusions(report: EvalReport, baseline: EvalReport) -> dict[str, float]:
    """Per-class accuracy of ``report`` minus ``baseline`` (same class order); NaN where either is unsampled."""
    if report.class_order != baseline.class_order:
        raise EpisodeError("reports cover different test classes")
    ours, theirs = report.per_class_accuracy, baseline.per_class_accuracy
    return {label: ours[label] - theirs[label] for label in report.class_order}
