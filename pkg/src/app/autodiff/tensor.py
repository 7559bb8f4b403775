import enum
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, ClassVar, Optional

import numpy as np

from src.app.core.errors import DomainError, GradientError, ShapeError

if TYPE_CHECKING:
    from src.app.autodiff.params import ParamStore

logger = logging.getLogger(__name__)

SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class OpKind(str, enum.Enum):
    matmul = "matmul"
    conv2d = "conv2d"
    maxpool2x2 = "maxpool2x2"
    relu = "relu"
    batchnorm = "batchnorm"
    add = "add"
    sub = "sub"
    scalar_mul = "scalar_mul"
    elementwise_mul = "elementwise_mul"
    reduce_mean = "reduce_mean"
    reduce_sum = "reduce_sum"
    l2_normalize = "l2_normalize"
    cos = "cos"
    arccos = "arccos"
    exp = "exp"
    log = "log"
    log_softmax = "log_softmax"
    negate = "negate"
    concat = "concat"
    flatten = "flatten"
    transpose = "transpose"
    take_rows = "take_rows"
    clamp = "clamp"
    sqrt = "sqrt"
    reshape = "reshape"


class Tensor:
    """
    Dense float32/float64 array plus the graph node that produced it.

    Tensors are treated as immutable values: primitives always allocate
    their outputs and never write into an input's buffer.
    """

    __slots__ = ("data", "node", "requires_grad", "name", "grad")

    def __init__(
            self,
            data: Any,
            requires_grad: bool = False,
            name: str | None = None,
            node: Optional["GradNode"] = None,
            dtype: Any = None,
    ):
        array = np.asarray(data, dtype=dtype)
        if array.dtype not in SUPPORTED_DTYPES:
            array = array.astype(np.float64)
        if any(extent < 1 for extent in array.shape):
            raise ShapeError(f"tensor extents must be >= 1, got {array.shape}")

        self.data: np.ndarray = array
        self.node = node
        self.requires_grad = requires_grad
        self.name = name
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        origin = self.node.op_kind.value if self.node else (self.name or "leaf")
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={origin})"


@dataclass(eq=False)
class GradNode:
    op_kind: OpKind
    parents: tuple[Tensor, ...]
    primitive: "Primitive"
    cached_forward: np.ndarray
    grad: np.ndarray | None = field(default=None)


class Primitive:
    """
    One differentiable operation.

    ``forward`` receives raw arrays and may stash whatever ``backward`` needs
    on ``self``; ``backward`` maps dL/d(output) to one gradient per input
    (``None`` for inputs that are never differentiated).
    """

    op_kind: ClassVar[OpKind]
    arity: ClassVar[int | None] = 1

    def __init__(self, **attrs: Any):
        self.attrs = attrs

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"forward not implemented for {self.op_kind.value}")

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError(f"backward not implemented for {self.op_kind.value}")

    def shape_error(self, *shapes: tuple[int, ...], detail: str = "") -> ShapeError:
        listed = " vs ".join(str(tuple(shape)) for shape in shapes)
        suffix = f" ({detail})" if detail else ""
        return ShapeError(f"{self.op_kind.value}: incompatible shapes {listed}{suffix}")


PRIMITIVES: dict[OpKind, type[Primitive]] = {}


def register_primitive(op_kind: OpKind) -> Callable[[type[Primitive]], type[Primitive]]:
    def decorator(cls: type[Primitive]) -> type[Primitive]:
        cls.op_kind = op_kind
        PRIMITIVES[op_kind] = cls
        return cls

    return decorator


def apply(op_kind: OpKind | str, *inputs: Tensor, **attrs: Any) -> Tensor:
    """Run one primitive forward and, if any input tracks gradients, record its GradNode."""
    kind = OpKind(op_kind)
    primitive = PRIMITIVES[kind](**attrs)

    if primitive.arity is not None and len(inputs) != primitive.arity:
        raise ShapeError(f"{kind.value}: expected {primitive.arity} inputs, got {len(inputs)}")
    if not inputs:
        raise ShapeError(f"{kind.value}: needs at least one input")

    dtypes = {tensor.dtype for tensor in inputs}
    if len(dtypes) > 1:
        raise ShapeError(f"{kind.value}: mixed dtypes {sorted(str(d) for d in dtypes)}")

    out = primitive.forward(*(tensor.data for tensor in inputs))
    if not np.all(np.isfinite(out)):
        raise DomainError(f"{kind.value}: produced non-finite values")

    requires_grad = any(tensor.requires_grad for tensor in inputs)
    node = GradNode(kind, tuple(inputs), primitive, out) if requires_grad else None
    return Tensor(out, requires_grad=requires_grad, node=node)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]

    while stack:
        tensor, children_done = stack.pop()
        if id(tensor) in visited:
            continue
        if children_done:
            visited.add(id(tensor))
            order.append(tensor)
            continue
        stack.append((tensor, True))
        if tensor.node is not None:
            for parent in tensor.node.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor, store: Optional["ParamStore"] = None) -> None:
    """
    Reverse-mode sweep from a scalar loss.

    Every gradient-tracking leaf gets ``.grad``; leaves handed out by a
    ParamStore also add their gradient into the store's accumulator.
    Parameters the loss never touches keep whatever (zero) gradient they had.
    """
    if loss.data.size != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        logger.debug("backward called on a loss that tracks no parameters")
        return

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

    for tensor in reversed(_topological_order(loss)):
        grad = grads.pop(id(tensor), None)
        if grad is None:
            continue

        node = tensor.node
        if node is None:
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad
            if store is not None and tensor.name is not None:
                store.accumulate(tensor.name, grad)
            continue

        node.grad = grad
        for parent, parent_grad in zip(node.parents, node.primitive.backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
