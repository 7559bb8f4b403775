"""
Primitive catalogue. Layout conventions: images are NHWC, conv kernels are
(kh, kw, C_in, C_out), matrices are 2-D. Broadcasting is limited to bias-add
over the last axis and the per-channel affine inside batchnorm.
"""
import math

import numpy as np

from src.app.autodiff.tensor import OpKind, Primitive, register_primitive
from src.app.core.errors import DomainError

ARCCOS_CLAMP = 1e-7
ARCCOS_TOLERANCE = 1e-3
NORM_FLOOR = 1e-12
BATCHNORM_EPS = 1e-5


@register_primitive(OpKind.matmul)
class MatMul(Primitive):
    arity = 2

    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise self.shape_error(a.shape, b.shape)
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


@register_primitive(OpKind.conv2d)
class Conv2D(Primitive):
    """Stride-1 cross-correlation; ``padding`` is "same" or "valid"."""

    arity = 3

    def forward(self, x, w, b):
        if x.ndim != 4 or w.ndim != 4 or x.shape[3] != w.shape[2]:
            raise self.shape_error(x.shape, w.shape)
        if b.shape != (w.shape[3],):
            raise self.shape_error(w.shape, b.shape, detail="bias must match output channels")

        padding = self.attrs.get("padding", "same")
        kh, kw = w.shape[:2]
        if padding == "same":
            top, left = (kh - 1) // 2, (kw - 1) // 2
            pads = ((0, 0), (top, kh - 1 - top), (left, kw - 1 - left), (0, 0))
        elif padding == "valid":
            pads = ((0, 0), (0, 0), (0, 0), (0, 0))
        else:
            raise ValueError(f"conv2d: unknown padding {padding!r}")

        xp = np.pad(x, pads)
        out_h, out_w = xp.shape[1] - kh + 1, xp.shape[2] - kw + 1
        if out_h < 1 or out_w < 1:
            raise self.shape_error(x.shape, w.shape, detail="kernel larger than padded input")

        out = np.zeros((x.shape[0], out_h, out_w, w.shape[3]), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                out += xp[:, i:i + out_h, j:j + out_w, :] @ w[i, j]
        out += b

        self.xp, self.w, self.pads, self.in_shape = xp, w, pads, x.shape
        return out

    def backward(self, grad):
        xp, w = self.xp, self.w
        kh, kw, c_in, c_out = w.shape
        out_h, out_w = grad.shape[1], grad.shape[2]
        flat_grad = grad.reshape(-1, c_out)

        dxp = np.zeros_like(xp)
        dw = np.empty_like(w)
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, i:i + out_h, j:j + out_w, :]
                dw[i, j] = patch.reshape(-1, c_in).T @ flat_grad
                dxp[:, i:i + out_h, j:j + out_w, :] += grad @ w[i, j].T

        _, height, width, _ = self.in_shape
        top, left = self.pads[1][0], self.pads[2][0]
        dx = dxp[:, top:top + height, left:left + width, :]
        return dx, dw, grad.sum(axis=(0, 1, 2))


@register_primitive(OpKind.maxpool2x2)
class MaxPool(Primitive):
    """Non-overlapping max pooling; trailing odd rows/columns are dropped."""

    def forward(self, x):
        size = self.attrs.get("size", 2)
        if x.ndim != 4:
            raise self.shape_error(x.shape, detail="expects NHWC input")
        batch, height, width, channels = x.shape
        out_h, out_w = height // size, width // size
        if out_h < 1 or out_w < 1:
            raise self.shape_error(x.shape, detail=f"spatial extent below pool size {size}")

        cropped = x[:, :out_h * size, :out_w * size, :]
        windows = (
            cropped.reshape(batch, out_h, size, out_w, size, channels)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(batch, out_h, out_w, channels, size * size)
        )
        # argmax keeps the first maximum, so ties route the gradient deterministically
        self.winner = windows.argmax(axis=-1)[..., None]
        self.in_shape, self.size = x.shape, size
        return np.take_along_axis(windows, self.winner, axis=-1)[..., 0]

    def backward(self, grad):
        batch, height, width, channels = self.in_shape
        size = self.size
        out_h, out_w = grad.shape[1], grad.shape[2]

        windows = np.zeros((batch, out_h, out_w, channels, size * size), dtype=grad.dtype)
        np.put_along_axis(windows, self.winner, grad[..., None], axis=-1)
        spread = (
            windows.reshape(batch, out_h, out_w, channels, size, size)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(batch, out_h * size, out_w * size, channels)
        )
        dx = np.zeros(self.in_shape, dtype=grad.dtype)
        dx[:, :out_h * size, :out_w * size, :] = spread
        return (dx,)


@register_primitive(OpKind.relu)
class ReLU(Primitive):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return (grad * self.mask,)


@register_primitive(OpKind.batchnorm)
class BatchNorm(Primitive):
    """Per-channel (last axis) normalization with the statistics of the current batch."""

    arity = 3

    def forward(self, x, gamma, beta):
        channels = x.shape[-1]
        if x.ndim < 2 or gamma.shape != (channels,) or beta.shape != (channels,):
            raise self.shape_error(x.shape, gamma.shape, beta.shape)

        eps = x.dtype.type(self.attrs.get("eps", BATCHNORM_EPS))
        axes = tuple(range(x.ndim - 1))
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        inv_std = 1 / np.sqrt(var + eps)
        x_hat = (x - mean) * inv_std

        self.axes, self.count = axes, x.size // channels
        self.x_hat, self.inv_std, self.gamma = x_hat, inv_std, gamma
        return gamma * x_hat + beta

    def backward(self, grad):
        axes, count, x_hat = self.axes, self.count, self.x_hat
        d_x_hat = grad * self.gamma
        dx = (self.inv_std / count) * (
            count * d_x_hat
            - d_x_hat.sum(axis=axes)
            - x_hat * (d_x_hat * x_hat).sum(axis=axes)
        )
        return dx, (grad * x_hat).sum(axis=axes), grad.sum(axis=axes)


@register_primitive(OpKind.add)
class Add(Primitive):
    """Same-shape sum, or bias-add of a vector along the last axis."""

    arity = 2

    def forward(self, a, b):
        self.bias = a.shape != b.shape
        if self.bias and not (b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]):
            raise self.shape_error(a.shape, b.shape)
        return a + b

    def backward(self, grad):
        if self.bias:
            return grad, grad.reshape(-1, grad.shape[-1]).sum(axis=0)
        return grad, grad


@register_primitive(OpKind.sub)
class Sub(Primitive):
    arity = 2

    def forward(self, a, b):
        if a.shape != b.shape:
            raise self.shape_error(a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return grad, -grad


@register_primitive(OpKind.scalar_mul)
class ScalarMul(Primitive):
    def forward(self, x):
        self.value = x.dtype.type(self.attrs["value"])
        return x * self.value

    def backward(self, grad):
        return (grad * self.value,)


@register_primitive(OpKind.elementwise_mul)
class ElementwiseMul(Primitive):
    arity = 2

    def forward(self, a, b):
        if a.shape != b.shape:
            raise self.shape_error(a.shape, b.shape)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class _Reduce(Primitive):
    def _expand(self, grad):
        axis = self.attrs.get("axis")
        if axis is not None and not self.attrs.get("keepdims", False):
            grad = np.expand_dims(grad, axis)
        return np.array(np.broadcast_to(grad, self.in_shape))


@register_primitive(OpKind.reduce_sum)
class ReduceSum(_Reduce):
    def forward(self, x):
        self.in_shape = x.shape
        return np.asarray(x.sum(axis=self.attrs.get("axis"), keepdims=self.attrs.get("keepdims", False)))

    def backward(self, grad):
        return (self._expand(grad),)


@register_primitive(OpKind.reduce_mean)
class ReduceMean(_Reduce):
    def forward(self, x):
        self.in_shape = x.shape
        axis = self.attrs.get("axis")
        self.count = x.size if axis is None else x.shape[axis]
        return np.asarray(x.mean(axis=axis, keepdims=self.attrs.get("keepdims", False)))

    def backward(self, grad):
        return (self._expand(grad) / grad.dtype.type(self.count),)


@register_primitive(OpKind.l2_normalize)
class L2Normalize(Primitive):
    """Row-wise unit scaling along the last axis; norms below the floor are clamped."""

    def forward(self, x):
        floor = x.dtype.type(self.attrs.get("floor", NORM_FLOOR))
        norm = np.sqrt((x * x).sum(axis=-1, keepdims=True))
        self.active = norm > floor
        self.scale = np.maximum(norm, floor)
        self.out = x / self.scale
        return self.out

    def backward(self, grad):
        radial = (grad * self.out).sum(axis=-1, keepdims=True)
        projected = np.where(self.active, grad - self.out * radial, grad)
        return (projected / self.scale,)


@register_primitive(OpKind.cos)
class Cos(Primitive):
    def forward(self, x):
        self.x = x
        return np.cos(x)

    def backward(self, grad):
        return (-grad * np.sin(self.x),)


@register_primitive(OpKind.arccos)
class ArcCos(Primitive):
    def forward(self, x):
        if x.size and (x.min() < -1 - ARCCOS_TOLERANCE or x.max() > 1 + ARCCOS_TOLERANCE):
            raise DomainError(
                f"arccos: input outside [-1, 1] by more than {ARCCOS_TOLERANCE} "
                f"(range [{x.min():.6g}, {x.max():.6g}]); inputs must be normalized upstream"
            )
        bound = 1 - ARCCOS_CLAMP
        self.clamped = np.clip(x, -bound, bound).astype(x.dtype)
        return np.arccos(self.clamped)

    def backward(self, grad):
        return (-grad / np.sqrt(1 - self.clamped * self.clamped),)


@register_primitive(OpKind.exp)
class Exp(Primitive):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


@register_primitive(OpKind.log)
class Log(Primitive):
    def forward(self, x):
        if x.size and x.min() <= 0:
            raise DomainError(f"log: non-positive input (min {x.min():.6g})")
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


@register_primitive(OpKind.log_softmax)
class LogSoftmax(Primitive):
    def forward(self, x):
        axis = self.attrs.get("axis", -1)
        shifted = x - x.max(axis=axis, keepdims=True)
        self.out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.axis = axis
        return self.out

    def backward(self, grad):
        return (grad - np.exp(self.out) * grad.sum(axis=self.axis, keepdims=True),)


@register_primitive(OpKind.negate)
class Negate(Primitive):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


@register_primitive(OpKind.concat)
class Concat(Primitive):
    arity = None

    def forward(self, *arrays):
        axis = self.attrs.get("axis", 0)
        first = arrays[0]
        for other in arrays[1:]:
            if other.ndim != first.ndim or any(
                    a != b for dim, (a, b) in enumerate(zip(first.shape, other.shape))
                    if dim != axis % first.ndim
            ):
                raise self.shape_error(first.shape, other.shape)
        self.axis = axis
        self.splits = np.cumsum([array.shape[axis] for array in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


@register_primitive(OpKind.flatten)
class Flatten(Primitive):
    def forward(self, x):
        self.in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


@register_primitive(OpKind.reshape)
class Reshape(Primitive):
    def forward(self, x):
        shape = tuple(self.attrs["shape"])
        if math.prod(shape) != x.size:
            raise self.shape_error(x.shape, shape)
        self.in_shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


@register_primitive(OpKind.transpose)
class Transpose(Primitive):
    def forward(self, x):
        if x.ndim != 2:
            raise self.shape_error(x.shape, detail="transpose is 2-D only")
        return x.T.copy()

    def backward(self, grad):
        return (grad.T.copy(),)


@register_primitive(OpKind.take_rows)
class TakeRows(Primitive):
    def forward(self, x):
        indices = np.asarray(self.attrs["indices"], dtype=np.intp)
        if indices.ndim != 1 or indices.size == 0 or indices.min() < 0 or indices.max() >= x.shape[0]:
            raise self.shape_error(x.shape, indices.shape, detail="row indices out of range")
        self.indices, self.in_shape = indices, x.shape
        return x[indices]

    def backward(self, grad):
        dx = np.zeros(self.in_shape, dtype=grad.dtype)
        np.add.at(dx, self.indices, grad)
        return (dx,)


@register_primitive(OpKind.clamp)
class Clamp(Primitive):
    """Clip to [low, high]; the gradient passes where the input lies within the bounds."""

    def forward(self, x):
        low, high = self.attrs.get("low"), self.attrs.get("high")
        inside = np.ones(x.shape, dtype=bool)
        if low is not None:
            inside &= x >= low
        if high is not None:
            inside &= x <= high
        self.inside = inside
        return np.clip(x, low, high).astype(x.dtype)

    def backward(self, grad):
        return (grad * self.inside,)


@register_primitive(OpKind.sqrt)
class Sqrt(Primitive):
    def forward(self, x):
        if x.size and x.min() < 0:
            raise DomainError(f"sqrt: negative input (min {x.min():.6g})")
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad):
        # below rounding level of the input the root is treated as the kink at zero
        floor = np.sqrt(np.finfo(grad.dtype).eps)
        safe = np.where(self.out > floor, self.out, 1.0)
        return (np.where(self.out > floor, grad * 0.5 / safe, 0.0).astype(grad.dtype, copy=False),)
