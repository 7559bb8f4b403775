from src.app.models.checkpoint import Checkpoint, TrainingState, load_checkpoint, save_checkpoint
from src.app.models.configs import BackboneConfig, Conv4Config, MLPConfig, Padding, backbone_from_dict
from src.app.models.embedding import EmbeddingParams, count_params, encode, forward, init_params

__all__ = [
    "BackboneConfig",
    "Checkpoint",
    "Conv4Config",
    "EmbeddingParams",
    "MLPConfig",
    "Padding",
    "TrainingState",
    "backbone_from_dict",
    "count_params",
    "encode",
    "forward",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
]
