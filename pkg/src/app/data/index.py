import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.app.core.errors import DatasetError


ExampleRef = Path | int


class ModalityKind(str, enum.Enum):
    images = "images"
    vectors = "vectors"


@dataclass(frozen=True)
class Modality:
    kind: ModalityKind
    shape: tuple[int, ...]


@dataclass
class DatasetIndex:
    """
    Class label -> example references. Image references are file paths;
    vector references are row numbers into ``vectors``.
    """

    classes: dict[str, list[ExampleRef]]
    modality: Modality
    vectors: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for label, examples in self.classes.items():
            if not examples:
                raise DatasetError(f"empty class: {label}")
        if self.modality.kind is ModalityKind.vectors:
            if self.vectors is None or self.vectors.ndim != 2:
                raise DatasetError("vector datasets need a 2-D vectors array")
            if self.vectors.shape[1:] != self.modality.shape:
                raise DatasetError(f"vectors {self.vectors.shape} do not match modality {self.modality.shape}")

    @property
    def labels(self) -> list[str]:
        return sorted(self.classes)

    @property
    def total(self) -> int:
        return sum(len(examples) for examples in self.classes.values())

    def count(self, label: str) -> int:
        return len(self.classes[label])
