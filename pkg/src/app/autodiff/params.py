import logging
from typing import Iterator, Mapping

import numpy as np

from src.app.autodiff.tensor import SUPPORTED_DTYPES, Tensor
from src.app.core.errors import ShapeError

logger = logging.getLogger(__name__)


class ParamStore:
    """
    Named parameter values with one gradient accumulator each.

    Values are replaced (never written in place) on update, so tensors and
    snapshots that still reference an old value keep seeing it unchanged.
    Mutation is single-writer: do not run two updates on one store at once.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        if self.dtype not in SUPPORTED_DTYPES:
            raise ValueError(f"unsupported parameter dtype {self.dtype}")
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._values:
            raise ValueError(f"duplicate parameter name '{name}'")
        array = np.array(value, dtype=self.dtype)
        self._values[name] = array
        self._grads[name] = np.zeros_like(array)

    def names(self) -> list[str]:
        return list(self._values)

    def value(self, name: str) -> np.ndarray:
        return self._values[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def set_value(self, name: str, value: np.ndarray) -> None:
        current = self._values[name]
        if np.shape(value) != current.shape:
            raise ShapeError(f"parameter '{name}': shape {np.shape(value)} != {current.shape}")
        self._values[name] = np.array(value, dtype=self.dtype)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._values.items())

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: value.shape for name, value in self._values.items()}

    def tensors(self, requires_grad: bool) -> dict[str, Tensor]:
        """Leaf tensors for one forward pass, named so backward can find their accumulator."""
        return {
            name: Tensor(value, requires_grad=requires_grad, name=name)
            for name, value in self._values.items()
        }

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        current = self._grads[name]
        if grad.shape != current.shape:
            raise ShapeError(f"gradient for '{name}': shape {grad.shape} != {current.shape}")
        self._grads[name] = current + grad.astype(self.dtype, copy=False)

    def zero_grad(self) -> None:
        for name, grad in self._grads.items():
            self._grads[name] = np.zeros_like(grad)

    def count(self) -> int:
        return sum(value.size for value in self._values.values())

    def copy(self) -> "ParamStore":
        clone = ParamStore(self.dtype)
        for name, value in self._values.items():
            clone.add(name, value)
        return clone

    def astype(self, dtype) -> "ParamStore":
        clone = ParamStore(dtype)
        for name, value in self._values.items():
            clone.add(name, value)
        return clone

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray], dtype=np.float32) -> "ParamStore":
        store = cls(dtype)
        for name, value in arrays.items():
            store.add(name, value)
        return store

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, name: str) -> bool:
        return name in self._values
