import math

import numpy as np
import pytest

from src.app.data.index import DatasetIndex, Modality, ModalityKind
from src.app.data.synthetic import SyntheticSpec, generate_synthetic


def vector_index(vectors_per_class: dict[str, np.ndarray]) -> DatasetIndex:
    """Vector dataset from explicit per-class blocks, rows laid out class by class."""
    classes, blocks, row = {}, [], 0
    for label, block in vectors_per_class.items():
        classes[label] = list(range(row, row + len(block)))
        blocks.append(block)
        row += len(block)
    vectors = np.concatenate(blocks).astype(np.float32)
    return DatasetIndex(classes=classes, modality=Modality(ModalityKind.vectors, (vectors.shape[1],)), vectors=vectors)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def separable_index() -> DatasetIndex:
    return generate_synthetic(
        SyntheticSpec(dim=16, num_classes=20, min_angle_sep=math.pi / 4, noise_sigma=0.15, examples_per_class=20, seed=3)
    )
