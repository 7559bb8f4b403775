from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from src.app.autodiff import functional as F
from src.app.autodiff.tensor import Tensor
from src.app.core.errors import EpisodeError, ShapeError

Label = Hashable


@dataclass
class Prototypes:
    matrix: Tensor
    class_ids: list[Label]

    def __post_init__(self):
        if len(self.class_ids) < 2:
            raise EpisodeError(f"prototypes need at least 2 classes, got {len(self.class_ids)}")
        if len(set(self.class_ids)) != len(self.class_ids):
            raise EpisodeError(f"duplicate class ids in {self.class_ids}")
        if self.matrix.data.ndim != 2 or self.matrix.shape[0] != len(self.class_ids):
            raise ShapeError(f"prototype matrix {self.matrix.shape} does not match {len(self.class_ids)} classes")

    @property
    def k(self) -> int:
        return len(self.class_ids)

    def index_of(self, label: Label) -> int:
        try:
            return self.class_ids.index(label)
        except ValueError:
            raise EpisodeError(f"label {label!r} is not among class ids {self.class_ids}") from None


def compute_prototypes(
        support_embeddings: Tensor,
        support_labels: Sequence[Label],
        class_order: Sequence[Label] | None = None,
) -> Prototypes:
    """
    Class means of the support embeddings, as one matmul with a fixed averaging matrix
    so the gradient flows back into every support row.
    """
    labels = list(support_labels)
    if support_embeddings.data.ndim != 2 or support_embeddings.shape[0] != len(labels):
        raise ShapeError(
            f"compute_prototypes: embeddings {support_embeddings.shape} vs {len(labels)} labels"
        )

    order = list(dict.fromkeys(labels)) if class_order is None else list(class_order)
    counts = Counter(labels)
    missing = [label for label in order if counts[label] == 0]
    if missing:
        raise EpisodeError(f"class with zero support examples: {missing}")
    extra = set(counts) - set(order)
    if extra:
        raise EpisodeError(f"support labels outside class order: {sorted(map(str, extra))}")
    if len({counts[label] for label in order}) != 1:
        raise EpisodeError(f"unequal support counts per class: {dict(counts)}")

    shots = counts[order[0]]
    averaging = np.zeros((len(order), len(labels)), dtype=support_embeddings.dtype)
    for column, label in enumerate(labels):
        averaging[order.index(label), column] = 1.0 / shots

    matrix = F.matmul(F.constant(averaging), support_embeddings)
    return Prototypes(matrix, order)
