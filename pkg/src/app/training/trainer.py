import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from src.app.autodiff import functional as F
from src.app.autodiff.optim import sgd_step
from src.app.autodiff.tensor import Tensor, backward
from src.app.common.seeds import derive_rng
from src.app.data.episodes import Episode, check_episode_feasible, sample_episode
from src.app.data.index import DatasetIndex
from src.app.data.loader import ExampleLoader
from src.app.data.splits import ClassSplit
from src.app.metrics.heads import (
    EpisodeLoss,
    MetricKind,
    MetricVariant,
    class_probabilities,
    distances_for,
    episode_loss,
    head_log_probabilities,
    predict_from_probabilities,
)
from src.app.metrics.prototypes import compute_prototypes
from src.app.models.checkpoint import Checkpoint, TrainingState
from src.app.models.configs import BackboneConfig
from src.app.models.embedding import EmbeddingParams, encode
from src.app.training.schedule import TrainConfig, early_stop_check, lr_at

logger = logging.getLogger(__name__)

TRACE_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainingTrace:
    epochs: list[EpochRecord] = field(default_factory=list)
    episode_losses: list[float] = field(default_factory=list)
    episode_lrs: list[float] = field(default_factory=list)
    stopped_early_at: int | None = None

    def column(self, name: str) -> list[float]:
        return [getattr(record, name) for record in self.epochs]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for record in self.epochs:
            writer.writerow([
                record.epoch,
                repr(record.train_loss),
                repr(record.train_acc),
                repr(record.val_loss),
                repr(record.val_acc),
                repr(record.lr),
            ])
        return buffer.getvalue()


@dataclass
class TrainingResult:
    params: EmbeddingParams
    trace: TrainingTrace
    checkpoint: Checkpoint


@dataclass
class EpisodeOutcome:
    loss: EpisodeLoss
    predictions: list[str]
    accuracy: float


def episode_objective(
        backbone: BackboneConfig,
        tensors: Mapping[str, Tensor],
        batch: Tensor,
        episode: Episode,
        kind: MetricKind,
        training: bool,
) -> tuple[EpisodeLoss, Tensor]:
    """
    Episode loss as a differentiable function of the parameter tensors.

    Support and query are encoded in one forward pass so batch statistics
    are shared; returns the loss and the query-by-class distance matrix.
    """
    embeddings = encode(backbone, tensors, batch, training=training)
    support_rows = len(episode.support)
    support = F.take_rows(embeddings, range(support_rows))
    query = F.take_rows(embeddings, range(support_rows, support_rows + len(episode.query)))

    protos = compute_prototypes(support, episode.support_labels, episode.class_order)
    distances = distances_for(query, protos, kind)
    log_probabilities = head_log_probabilities(distances, kind, episode.query_labels, protos.class_ids)
    loss = episode_loss(
        F.exp(log_probabilities),
        episode.query_labels,
        protos.class_ids,
        log_probabilities=log_probabilities,
    )
    return loss, distances


def run_episode(
        params: EmbeddingParams,
        loader: ExampleLoader,
        episode: Episode,
        kind: MetricKind,
        track_gradients: bool,
) -> EpisodeOutcome:
    batch = Tensor(loader.load(episode.refs).astype(params.store.dtype))
    tensors = params.store.tensors(requires_grad=track_gradients)
    loss, distances = episode_objective(params.backbone, tensors, batch, episode, kind, training=track_gradients)

    if kind.variant is MetricVariant.aam:
        probabilities = class_probabilities(distances, kind)
    else:
        probabilities = loss.probabilities
    predictions = predict_from_probabilities(probabilities, list(episode.class_order))
    correct = sum(predicted == truth for predicted, truth in zip(predictions, episode.query_labels))
    return EpisodeOutcome(loss=loss, predictions=predictions, accuracy=correct / len(episode.query))


def _validate(
        params: EmbeddingParams,
        loader: ExampleLoader,
        block: list[Episode],
        kind: MetricKind,
) -> tuple[float, float]:
    losses, accuracies = [], []
    for episode in block:
        outcome = run_episode(params, loader, episode, kind, track_gradients=False)
        losses.append(outcome.loss.value)
        accuracies.append(outcome.accuracy)
    return float(np.mean(losses)), float(np.mean(accuracies))


def run_training(
        cfg: TrainConfig,
        index: DatasetIndex,
        split: ClassSplit,
        params: EmbeddingParams,
        loader: ExampleLoader | None = None,
) -> TrainingResult:
    """
    Episodic SGD over the train classes, one optimizer step per episode.

    ``params`` is updated in place. The returned checkpoint holds the
    snapshot with the lowest validation loss (training loss when the split
    has too few validation classes). Validation scores the margin-free head
    that evaluation uses, so losses of runs with different margins compare.
    """
    check_episode_feasible(index, split.train_classes, cfg.n, cfg.k, cfg.q)
    loader = loader or ExampleLoader(index)

    validation_block: list[Episode] = []
    if len(split.val_classes) >= cfg.k and cfg.val_episodes > 0:
        check_episode_feasible(index, split.val_classes, cfg.n, cfg.k, cfg.q)
        val_rng = derive_rng(cfg.seed, "validation")
        validation_block = [
            sample_episode(index, split.val_classes, cfg.n, cfg.k, cfg.q, val_rng)
            for _ in range(cfg.val_episodes)
        ]
    else:
        logger.warning(
            f"Validation skipped: {len(split.val_classes)} validation classes for k={cfg.k}; "
            f"model selection uses training loss"
        )

    train_rng = derive_rng(cfg.seed, "train-episodes")
    trace = TrainingTrace()
    best_loss = math.inf
    best_params = params.copy()
    best_state: TrainingState | None = None
    history: list[float] = []
    global_episode = 0

    logger.info(
        f"Training {params.backbone.kind} with {cfg.metric.label} head: "
        f"{cfg.k}-way {cfg.n}-shot q={cfg.q}, up to {cfg.epochs} epochs"
    )
    for epoch in range(1, cfg.epochs + 1):
        epoch_lr = lr_at(global_episode, cfg)
        losses, accuracies = [], []
        for _ in range(cfg.episodes_per_epoch):
            lr = lr_at(global_episode, cfg)
            episode = sample_episode(index, split.train_classes, cfg.n, cfg.k, cfg.q, train_rng)
            outcome = run_episode(params, loader, episode, cfg.metric, track_gradients=True)
            backward(outcome.loss.tensor, params.store)
            sgd_step(params.store, lr)

            losses.append(outcome.loss.value)
            accuracies.append(outcome.accuracy)
            trace.episode_losses.append(outcome.loss.value)
            trace.episode_lrs.append(lr)
            logger.debug(f"Episode {global_episode}: loss={outcome.loss.value:.6f} lr={lr:.3e}")
            global_episode += 1

        train_loss, train_acc = float(np.mean(losses)), float(np.mean(accuracies))
        if validation_block:
            val_loss, val_acc = _validate(params, loader, validation_block, cfg.metric.inference_kind)
        else:
            val_loss, val_acc = train_loss, train_acc

        trace.epochs.append(EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc, epoch_lr))
        logger.info(
            f"Epoch {epoch}: train_loss={train_loss:.4f} train_acc={train_acc:.4f} "
            f"val_loss={val_loss:.4f} val_acc={val_acc:.4f} lr={epoch_lr:.3e}"
        )

        if val_loss < best_loss:
            best_loss = val_loss
            best_params = params.copy()
            best_state = TrainingState(epoch=epoch, global_episode=global_episode, best_val_loss=val_loss)

        history.append(val_loss)
        if early_stop_check(history, cfg.early_stop_min_delta, cfg.early_stop_patience_epochs):
            trace.stopped_early_at = epoch
            logger.info(f"Early stop at epoch {epoch}: best validation loss {best_loss:.4f}")
            break

    return TrainingResult(params=params, trace=trace, checkpoint=Checkpoint(best_params, best_state))
