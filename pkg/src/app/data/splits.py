import logging
from dataclasses import dataclass

import numpy as np

from src.app.core.errors import DatasetError
from src.app.data.index import DatasetIndex

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassSplit:
    train_classes: tuple[str, ...]
    val_classes: tuple[str, ...]
    test_classes: tuple[str, ...]

    def __post_init__(self):
        train, val, test = set(self.train_classes), set(self.val_classes), set(self.test_classes)
        if train & val or train & test or val & test:
            raise DatasetError("class split parts must be pairwise disjoint")

    def part(self, name: str) -> tuple[str, ...]:
        parts = {"train": self.train_classes, "val": self.val_classes, "test": self.test_classes}
        if name not in parts:
            raise KeyError(f"unknown split part {name!r}")
        return parts[name]


def split_classes(index: DatasetIndex, counts: tuple[int, int, int], seed: int) -> ClassSplit:
    """Shuffle the sorted class labels with ``seed`` and cut them into train/val/test."""
    n_train, n_val, n_test = counts
    if min(counts) < 0:
        raise DatasetError(f"split counts must be >= 0, got {counts}")

    labels = index.labels
    if n_train + n_val + n_test > len(labels):
        raise DatasetError(
            f"insufficient classes: split {counts} needs {n_train + n_val + n_test}, dataset has {len(labels)}"
        )

    order = np.random.default_rng(seed).permutation(len(labels))
    shuffled = [labels[position] for position in order]
    split = ClassSplit(
        train_classes=tuple(shuffled[:n_train]),
        val_classes=tuple(shuffled[n_train:n_train + n_val]),
        test_classes=tuple(shuffled[n_train + n_val:n_train + n_val + n_test]),
    )
    logger.debug(f"Split {len(labels)} classes into {counts} with seed {seed}")
    return split
