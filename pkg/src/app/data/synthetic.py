import logging
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from src.app.common.atomic_files import write_bytes_atomic
from src.app.common.binary_container import decode_container, encode_container
from src.app.core.errors import CheckpointError, DatasetError
from src.app.data.index import DatasetIndex, Modality, ModalityKind

logger = logging.getLogger(__name__)

ARCHIVE_MAGIC = "PROTO-MARGIN-SYNTHETIC v1"
MAX_ATTEMPTS = 100_000
ANTIPODAL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SyntheticSpec:
    dim: int = 16
    num_classes: int = 10
    min_angle_sep: float = math.pi / 4
    noise_sigma: float = 0.15
    examples_per_class: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise DatasetError(f"synthetic dim must be >= 2, got {self.dim}")
        if self.num_classes < 2:
            raise DatasetError(f"synthetic data needs >= 2 classes, got {self.num_classes}")
        if self.examples_per_class < 1:
            raise DatasetError("examples_per_class must be >= 1")
        if self.noise_sigma < 0:
            raise DatasetError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.min_angle_sep <= math.pi:
            raise DatasetError(f"min_angle_sep must lie in [0, pi], got {self.min_angle_sep}")


def class_label(position: int, num_classes: int) -> str:
    return f"class_{position:0{max(2, len(str(num_classes - 1)))}d}"


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.arccos(np.clip(a @ b, -1.0, 1.0)))


def _unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


def sample_class_means(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Unit directions with pairwise angle >= min_angle_sep, by rejection sampling."""
    first = _unit(rng.standard_normal(spec.dim))
    if spec.min_angle_sep >= math.pi - ANTIPODAL_TOLERANCE:
        if spec.num_classes != 2:
            raise DatasetError(f"separation pi is only feasible for 2 classes, got {spec.num_classes}")
        return np.stack([first, -first])

    means = [first]
    attempts = 0
    while len(means) < spec.num_classes:
        if attempts >= MAX_ATTEMPTS:
            raise DatasetError(
                f"separation infeasible: placed {len(means)} of {spec.num_classes} directions at "
                f"{spec.min_angle_sep:.4f} rad in R^{spec.dim} after {MAX_ATTEMPTS} attempts"
            )
        attempts += 1
        candidate = _unit(rng.standard_normal(spec.dim))
        if all(_angle(candidate, mean) >= spec.min_angle_sep for mean in means):
            means.append(candidate)

    logger.debug(f"Placed {spec.num_classes} class directions after {attempts} attempts")
    return np.stack(means)


def generate_synthetic(spec: SyntheticSpec) -> DatasetIndex:
    """Noisy unit vectors around well-separated class directions on the hypersphere."""
    rng = np.random.default_rng(spec.seed)
    means = sample_class_means(spec, rng)

    blocks = []
    for mean in means:
        noisy = mean + spec.noise_sigma * rng.standard_normal((spec.examples_per_class, spec.dim))
        blocks.append(noisy / np.linalg.norm(noisy, axis=1, keepdims=True))
    vectors = np.concatenate(blocks).astype(np.float32)

    index = _vector_index(spec, vectors, means.astype(np.float32))
    logger.info(
        f"Generated {index.total} synthetic vectors: {spec.num_classes} classes in R^{spec.dim}, "
        f"sep={spec.min_angle_sep:.4f}, sigma={spec.noise_sigma}"
    )
    return index


def _vector_index(spec: SyntheticSpec, vectors: np.ndarray, means: np.ndarray | None) -> DatasetIndex:
    per_class = spec.examples_per_class
    classes = {
        class_label(position, spec.num_classes): list(range(position * per_class, (position + 1) * per_class))
        for position in range(spec.num_classes)
    }
    metadata = {"synthetic_spec": spec}
    if means is not None:
        metadata["class_means"] = means
    return DatasetIndex(
        classes=classes,
        modality=Modality(ModalityKind.vectors, (spec.dim,)),
        vectors=vectors,
        metadata=metadata,
    )


def save_synthetic_archive(index: DatasetIndex, path: str | os.PathLike) -> Path:
    spec: SyntheticSpec | None = index.metadata.get("synthetic_spec")
    if spec is None:
        raise DatasetError("only generated synthetic datasets can be archived")

    header = {
        "dim": spec.dim,
        "classes": index.labels,
        "counts": [index.count(label) for label in index.labels],
        "seed": spec.seed,
        "spec": asdict(spec),
    }
    # class-then-index order: rows are already laid out class by class
    payload = encode_container(ARCHIVE_MAGIC, header, {"vectors": index.vectors})
    target = write_bytes_atomic(path, payload)
    logger.info(f"Synthetic archive written to {target}")
    return target


def load_synthetic_archive(path: str | os.PathLike) -> DatasetIndex:
    source = Path(path)
    if not source.is_file():
        raise DatasetError(f"synthetic archive not found: {source}")
    try:
        header, arrays, _ = decode_container(ARCHIVE_MAGIC, source.read_bytes(), str(source))
    except CheckpointError as e:
        raise DatasetError(str(e)) from e

    spec = SyntheticSpec(**header["spec"])
    vectors = arrays["vectors"]
    if vectors.shape != (spec.num_classes * spec.examples_per_class, spec.dim):
        raise DatasetError(f"{source}: vector block {vectors.shape} does not match the header")
    return _vector_index(spec, vectors, None)
