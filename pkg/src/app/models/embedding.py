import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from src.app.autodiff import functional as F
from src.app.autodiff.params import ParamStore
from src.app.autodiff.tensor import Tensor
from src.app.core.errors import ShapeError
from src.app.models.configs import BackboneConfig, Conv4Config, MLPConfig

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingParams:
    backbone: BackboneConfig
    store: ParamStore

    @property
    def embedding_dim(self) -> int:
        return self.backbone.embedding_dim

    def astype(self, dtype) -> "EmbeddingParams":
        return EmbeddingParams(self.backbone, self.store.astype(dtype))

    def copy(self) -> "EmbeddingParams":
        return EmbeddingParams(self.backbone, self.store.copy())


def declared_shapes(backbone: BackboneConfig) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes the architecture declares, in forward order."""
    shapes: dict[str, tuple[int, ...]] = {}
    if isinstance(backbone, Conv4Config):
        channels = backbone.input_channels
        for block in range(backbone.blocks):
            filters = backbone.filters_per_block
            shapes[f"block{block}.conv.weight"] = (backbone.kernel, backbone.kernel, channels, filters)
            shapes[f"block{block}.conv.bias"] = (filters,)
            shapes[f"block{block}.bn.gamma"] = (filters,)
            shapes[f"block{block}.bn.beta"] = (filters,)
            channels = filters
    else:
        widths = backbone.layer_widths
        for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            shapes[f"layer{layer}.weight"] = (fan_in, fan_out)
            shapes[f"layer{layer}.bias"] = (fan_out,)
    return shapes


def init_params(backbone: BackboneConfig, seed: int, dtype=np.float32) -> EmbeddingParams:
    """
    He initialization: weights ~ N(0, 2 / fan_in), biases and bn.beta zero, bn.gamma one.

    Values are drawn in float64 and cast, so the same (config, seed) gives
    bit-identical stores for either dtype.
    """
    rng = np.random.default_rng(seed)
    store = ParamStore(dtype)

    for name, shape in declared_shapes(backbone).items():
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[:-1]))
            value = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        elif name.endswith(".gamma"):
            value = np.ones(shape)
        else:
            value = np.zeros(shape)
        store.add(name, value)

    logger.debug(f"Initialized {backbone.kind} backbone with {store.count()} parameters (seed {seed})")
    return EmbeddingParams(backbone, store)


def encode(
        backbone: BackboneConfig,
        tensors: Mapping[str, Tensor],
        batch: Tensor,
        training: bool,
) -> Tensor:
    """Embed a batch with explicit parameter tensors; returns B x d."""
    expected = backbone.input_shape
    if tuple(batch.shape[1:]) != tuple(expected):
        raise ShapeError(f"forward: batch shape {batch.shape} does not match input {expected}")

    if isinstance(backbone, MLPConfig):
        hidden = batch
        layers = len(backbone.layer_widths) - 1
        for layer in range(layers):
            hidden = F.add(F.matmul(hidden, tensors[f"layer{layer}.weight"]), tensors[f"layer{layer}.bias"])
            if layer < layers - 1:
                hidden = F.relu(hidden)
        return hidden

    if training and batch.shape[0] < 2:
        raise ShapeError("forward: batchnorm needs a batch of at least 2 in training mode")

    hidden = batch
    for block in range(backbone.blocks):
        hidden = F.conv2d(
            hidden,
            tensors[f"block{block}.conv.weight"],
            tensors[f"block{block}.conv.bias"],
            padding=backbone.padding.value,
        )
        hidden = F.batchnorm(hidden, tensors[f"block{block}.bn.gamma"], tensors[f"block{block}.bn.beta"])
        hidden = F.relu(hidden)
        hidden = F.maxpool2x2(hidden, size=backbone.pool)
    return F.flatten(hidden)


def forward(params: EmbeddingParams, batch: Tensor | np.ndarray, track_gradients: bool) -> Tensor:
    if not isinstance(batch, Tensor):
        batch = Tensor(np.asarray(batch, dtype=params.store.dtype))
    tensors = params.store.tensors(requires_grad=track_gradients)
    return encode(params.backbone, tensors, batch, training=track_gradients)


def count_params(params: EmbeddingParams) -> int:
    return params.store.count()
