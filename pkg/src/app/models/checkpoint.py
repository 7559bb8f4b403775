import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from src.app.autodiff.params import ParamStore
from src.app.common.atomic_files import write_bytes_atomic
from src.app.common.binary_container import decode_container, encode_container
from src.app.core.errors import CheckpointError
from src.app.models.configs import backbone_from_dict
from src.app.models.embedding import EmbeddingParams, declared_shapes

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "PROTO-MARGIN-CHECKPOINT v1"


@dataclass(frozen=True)
class TrainingState:
    epoch: int
    global_episode: int
    best_val_loss: float


@dataclass
class Checkpoint:
    params: EmbeddingParams
    state: TrainingState | None = None


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    params = checkpoint.params
    header = {"backbone": params.backbone.to_dict()}
    arrays = {name: value for name, value in params.store.items()}
    footer = asdict(checkpoint.state) if checkpoint.state is not None else None
    return encode_container(CHECKPOINT_MAGIC, header, arrays, footer)


def save_checkpoint(checkpoint: Checkpoint, path: str | os.PathLike) -> Path:
    target = write_bytes_atomic(path, encode_checkpoint(checkpoint))
    logger.info(f"Checkpoint saved to {target}")
    return target


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    source = Path(path)
    if not source.is_file():
        raise CheckpointError(f"checkpoint not found: {source}")

    header, arrays, footer = decode_container(CHECKPOINT_MAGIC, source.read_bytes(), str(source))
    backbone = backbone_from_dict(header["backbone"])

    expected = declared_shapes(backbone)
    found = {name: array.shape for name, array in arrays.items()}
    if found != expected:
        raise CheckpointError(f"{source}: parameters do not match the {backbone.kind} architecture")

    store = ParamStore.from_arrays(arrays, dtype=np.float32)
    state = None
    if footer is not None:
        state = TrainingState(
            epoch=int(footer["epoch"]),
            global_episode=int(footer["global_episode"]),
            best_val_loss=float(footer["best_val_loss"]),
        )
    else:
        logger.warning(f"Checkpoint {source} has no training-state footer")
    return Checkpoint(EmbeddingParams(backbone, store), state)
