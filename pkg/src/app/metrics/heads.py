"""
Distance functions and softmax heads over class prototypes.

Heads:
    euclidean   logits = -||x - L||^2 (or -||x - L|| when squared=False)
    cosine      logits = cos(d), d = arccos of the cosine similarity
    aam         as cosine, but the target logit is cos(min(d_target + m, pi))

The margin is a training penalty only; predict always uses the margin-free
probabilities because the target is unknown at inference.
"""
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.app.autodiff import functional as F
from src.app.autodiff.tensor import Tensor
from src.app.core.errors import DomainError, ShapeError
from src.app.metrics.prototypes import Label, Prototypes

NORM_GUARD = 1e-12


class MetricVariant(str, enum.Enum):
    euclidean = "euclidean"
    cosine = "cosine"
    aam = "aam"


@dataclass(frozen=True)
class MetricKind:
    variant: MetricVariant
    margin: float = 0.0
    squared: bool = field(default=True)

    def __post_init__(self):
        object.__setattr__(self, "variant", MetricVariant(self.variant))
        if self.variant is MetricVariant.aam and not 0 <= self.margin < math.pi / 2:
            raise DomainError(f"aam margin must lie in [0, pi/2), got {self.margin}")

    @classmethod
    def euclidean(cls, squared: bool = True) -> "MetricKind":
        return cls(MetricVariant.euclidean, squared=squared)

    @classmethod
    def cosine(cls) -> "MetricKind":
        return cls(MetricVariant.cosine)

    @classmethod
    def aam(cls, margin: float = 0.5) -> "MetricKind":
        return cls(MetricVariant.aam, margin=margin)

    @property
    def is_angular(self) -> bool:
        return self.variant is not MetricVariant.euclidean

    @property
    def inference_kind(self) -> "MetricKind":
        return MetricKind.cosine() if self.variant is MetricVariant.aam else self

    @property
    def label(self) -> str:
        if self.variant is MetricVariant.aam:
            return f"aam(m={self.margin:.2f})"
        if self.variant is MetricVariant.euclidean and not self.squared:
            return "euclidean(plain)"
        return self.variant.value

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "margin": self.margin, "squared": self.squared}


@dataclass
class EpisodeLoss:
    value: float
    per_query_nll: list[float]
    probabilities: Tensor
    tensor: Tensor


def _check_pair(query_embeddings: Tensor, protos: Prototypes, op: str) -> None:
    query_shape, proto_shape = query_embeddings.shape, protos.matrix.shape
    if len(query_shape) != 2 or query_shape[1] != proto_shape[1]:
        raise ShapeError(f"{op}: incompatible shapes {query_shape} vs {proto_shape}")


def angular_distance(query_embeddings: Tensor, protos: Prototypes) -> Tensor:
    """Q x k matrix of arccos(cosine similarity), values in [0, pi]."""
    _check_pair(query_embeddings, protos, "angular_distance")
    for what, matrix in (("query", query_embeddings.data), ("prototype", protos.matrix.data)):
        norms = np.sqrt((matrix.astype(np.float64) ** 2).sum(axis=1))
        if norms.min() <= NORM_GUARD:
            raise DomainError(f"angular_distance: zero-norm {what} row {int(norms.argmin())} has no direction")

    queries = F.l2_normalize(query_embeddings)
    centres = F.l2_normalize(protos.matrix)
    return F.arccos(F.matmul(queries, F.transpose(centres)))


def euclidean_sq_distance(query_embeddings: Tensor, protos: Prototypes) -> Tensor:
    """Q x k matrix of squared L2 distances, expanded as |x|^2 + |L|^2 - 2 x.L."""
    _check_pair(query_embeddings, protos, "euclidean_sq_distance")
    queries, centres = query_embeddings, protos.matrix
    q, k = queries.shape[0], centres.shape[0]

    query_sq = F.reshape(F.reduce_sum(F.mul(queries, queries), axis=1), (q, 1))
    centre_sq = F.reshape(F.reduce_sum(F.mul(centres, centres), axis=1), (1, k))
    ones_k = F.constant(np.ones((1, k)), like=queries)
    ones_q = F.constant(np.ones((q, 1)), like=queries)

    norms = F.add(F.matmul(query_sq, ones_k), F.matmul(ones_q, centre_sq))
    cross = F.scalar_mul(F.matmul(queries, F.transpose(centres)), 2.0)
    return F.clamp(F.sub(norms, cross), low=0.0)


def distances_for(query_embeddings: Tensor, protos: Prototypes, kind: MetricKind) -> Tensor:
    if kind.is_angular:
        return angular_distance(query_embeddings, protos)
    return euclidean_sq_distance(query_embeddings, protos)


def _check_distances(distances: Tensor, kind: MetricKind) -> None:
    values = distances.data
    if values.ndim != 2:
        raise ShapeError(f"distances must be Q x k, got {distances.shape}")
    if np.isnan(values).any():
        raise DomainError("distances contain NaN")
    if kind.is_angular and (values.min() < 0 or values.max() > math.pi + 1e-6):
        raise DomainError("angular distances must lie in [0, pi]")
    if not kind.is_angular and values.min() < 0:
        raise DomainError("euclidean distances must be >= 0")


def _margin_free_logits(distances: Tensor, kind: MetricKind) -> Tensor:
    if kind.is_angular:
        return F.cos(distances)
    if kind.squared:
        return F.negate(distances)
    return F.negate(F.sqrt(distances))


def class_log_probabilities(distances: Tensor, kind: MetricKind) -> Tensor:
    _check_distances(distances, kind)
    return F.log_softmax(_margin_free_logits(distances, kind.inference_kind), axis=1)


def class_probabilities(distances: Tensor, kind: MetricKind) -> Tensor:
    """Row-wise softmax of cos(d) (angular heads) or -d (euclidean)."""
    return F.exp(class_log_probabilities(distances, kind))


def _target_columns(target_labels: Sequence[Label], class_ids: Sequence[Label], rows: int) -> np.ndarray:
    if len(target_labels) != rows:
        raise ShapeError(f"{len(target_labels)} target labels for {rows} query rows")
    lookup = {label: column for column, label in enumerate(class_ids)}
    missing = [label for label in target_labels if label not in lookup]
    if missing:
        raise DomainError(f"target labels not among class ids: {missing}")
    return np.array([lookup[label] for label in target_labels], dtype=np.intp)


def one_hot(columns: np.ndarray, k: int, dtype) -> np.ndarray:
    encoded = np.zeros((len(columns), k), dtype=dtype)
    encoded[np.arange(len(columns)), columns] = 1
    return encoded


def aam_log_probabilities(
        distances: Tensor,
        target_labels: Sequence[Label],
        class_ids: Sequence[Label],
        margin: float,
) -> Tensor:
    if not 0 <= margin < math.pi / 2:
        raise DomainError(f"aam margin must lie in [0, pi/2), got {margin}")
    _check_distances(distances, MetricKind.cosine())

    rows, k = distances.shape
    targets = one_hot(_target_columns(target_labels, class_ids, rows), k, distances.dtype)

    penalised = F.add(distances, F.constant(targets * margin, like=distances))
    target_logits = F.cos(F.clamp(penalised, high=math.pi))
    other_logits = F.cos(distances)

    target_mask = F.constant(targets, like=distances)
    other_mask = F.constant(1 - targets, like=distances)
    logits = F.add(F.mul(target_logits, target_mask), F.mul(other_logits, other_mask))
    return F.log_softmax(logits, axis=1)


def aam_probabilities(
        distances: Tensor,
        target_labels: Sequence[Label],
        class_ids: Sequence[Label],
        margin: float,
) -> Tensor:
    """Margin-penalised softmax; at margin 0 it coincides with the cosine head."""
    return F.exp(aam_log_probabilities(distances, target_labels, class_ids, margin))


def head_log_probabilities(
        distances: Tensor,
        kind: MetricKind,
        target_labels: Sequence[Label] | None = None,
        class_ids: Sequence[Label] | None = None,
) -> Tensor:
    """Training-time head: applies the margin when the kind is aam."""
    if kind.variant is MetricVariant.aam:
        if target_labels is None or class_ids is None:
            raise DomainError("aam head needs target labels and class ids")
        return aam_log_probabilities(distances, target_labels, class_ids, kind.margin)
    return class_log_probabilities(distances, kind)


def episode_loss(
        probabilities: Tensor,
        target_labels: Sequence[Label],
        class_ids: Sequence[Label],
        log_probabilities: Tensor | None = None,
) -> EpisodeLoss:
    """
    Mean negative log-likelihood of the target class.

    Pass ``log_probabilities`` from the head to stay on the log-softmax path;
    without it the log is taken of ``probabilities`` and an exact zero
    target probability is rejected.
    """
    rows, k = probabilities.shape
    columns = _target_columns(target_labels, class_ids, rows)

    if log_probabilities is None:
        picked = probabilities.data[np.arange(rows), columns]
        if (picked == 0).any():
            raise DomainError("target probability is exactly 0; use the log-softmax path")
        log_probabilities = F.log(F.clamp(probabilities, low=float(np.finfo(probabilities.dtype).tiny)))

    mask = F.constant(one_hot(columns, k, log_probabilities.dtype))
    per_query = F.negate(F.reduce_sum(F.mul(log_probabilities, mask), axis=1))
    value = F.reduce_mean(per_query)

    return EpisodeLoss(
        value=float(value.item()),
        per_query_nll=[float(nll) for nll in per_query.data],
        probabilities=probabilities,
        tensor=value,
    )


def predict(query_embeddings: Tensor, protos: Prototypes, kind: MetricKind) -> list[Label]:
    """Margin-free argmax; ties go to the lowest class index."""
    distances = distances_for(query_embeddings, protos, kind)
    probabilities = class_probabilities(distances, kind)
    return predict_from_probabilities(probabilities, protos.class_ids)


def predict_from_probabilities(probabilities: Tensor, class_ids: Sequence[Label]) -> list[Label]:
    # np.argmax returns the first maximal index
    return [class_ids[column] for column in np.argmax(probabilities.data, axis=1)]
