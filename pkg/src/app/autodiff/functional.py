from typing import Sequence

import numpy as np

from src.app.autodiff import primitives  # noqa: F401  (fills the primitive registry)
from src.app.autodiff.tensor import OpKind, Tensor, apply


def constant(data, like: Tensor | None = None, dtype=None) -> Tensor:
    """Non-tracking tensor, by default in the dtype of ``like``."""
    if dtype is None and like is not None:
        dtype = like.dtype
    return Tensor(np.asarray(data, dtype=dtype))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.matmul, a, b)


def conv2d(x: Tensor, w: Tensor, b: Tensor, padding: str = "same") -> Tensor:
    return apply(OpKind.conv2d, x, w, b, padding=padding)


def maxpool2x2(x: Tensor, size: int = 2) -> Tensor:
    return apply(OpKind.maxpool2x2, x, size=size)


def relu(x: Tensor) -> Tensor:
    return apply(OpKind.relu, x)


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return apply(OpKind.batchnorm, x, gamma, beta, eps=eps)


def add(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.add, a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.sub, a, b)


def scalar_mul(x: Tensor, value: float) -> Tensor:
    return apply(OpKind.scalar_mul, x, value=value)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return apply(OpKind.elementwise_mul, a, b)


def reduce_sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    return apply(OpKind.reduce_sum, x, axis=axis, keepdims=keepdims)


def reduce_mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    return apply(OpKind.reduce_mean, x, axis=axis, keepdims=keepdims)


def l2_normalize(x: Tensor) -> Tensor:
    return apply(OpKind.l2_normalize, x)


def cos(x: Tensor) -> Tensor:
    return apply(OpKind.cos, x)


def arccos(x: Tensor) -> Tensor:
    return apply(OpKind.arccos, x)


def exp(x: Tensor) -> Tensor:
    return apply(OpKind.exp, x)


def log(x: Tensor) -> Tensor:
    return apply(OpKind.log, x)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return apply(OpKind.log_softmax, x, axis=axis)


def negate(x: Tensor) -> Tensor:
    return apply(OpKind.negate, x)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return apply(OpKind.concat, *tensors, axis=axis)


def flatten(x: Tensor) -> Tensor:
    return apply(OpKind.flatten, x)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return apply(OpKind.reshape, x, shape=tuple(shape))


def transpose(x: Tensor) -> Tensor:
    return apply(OpKind.transpose, x)


def take_rows(x: Tensor, indices: Sequence[int]) -> Tensor:
    return apply(OpKind.take_rows, x, indices=tuple(indices))


def clamp(x: Tensor, low: float | None = None, high: float | None = None) -> Tensor:
    return apply(OpKind.clamp, x, low=low, high=high)


def sqrt(x: Tensor) -> Tensor:
    return apply(OpKind.sqrt, x)
