import logging
from typing import Callable, Mapping

import numpy as np

from src.app.autodiff.params import ParamStore
from src.app.autodiff.tensor import Tensor, backward
from src.app.core.errors import GradientError

logger = logging.getLogger(__name__)

ScalarFunction = Callable[[Mapping[str, Tensor]], Tensor]


def _evaluate(function: ScalarFunction, params: ParamStore, requires_grad: bool) -> Tensor:
    value = function(params.tensors(requires_grad=requires_grad))
    if value.data.size != 1:
        raise GradientError(f"gradient check needs a scalar function, got shape {value.shape}")
    if not np.isfinite(value.data).all():
        raise GradientError("gradient check: function value is not finite")
    return value


def gradient_check(function: ScalarFunction, params: ParamStore, epsilon: float = 1e-4) -> float:
    """
    Compare backward() against central differences for every scalar entry of ``params``.

    Returns max |analytic - numeric| / max(1, |numeric|). The store must be
    float64 and is left with its original values and zeroed gradients.
    """
    if params.dtype != np.float64:
        raise GradientError(f"gradient check runs in float64, store is {params.dtype}")

    params.zero_grad()
    backward(_evaluate(function, params, requires_grad=True), params)
    analytic = {name: params.grad(name).copy() for name in params.names()}
    params.zero_grad()

    worst = 0.0
    for name in params.names():
        original = params.value(name)
        try:
            for index in np.ndindex(original.shape):
                shifted = original.copy()
                shifted[index] = original[index] + epsilon
                params.set_value(name, shifted)
                upper = _evaluate(function, params, requires_grad=False).item()

                shifted[index] = original[index] - epsilon
                params.set_value(name, shifted)
                lower = _evaluate(function, params, requires_grad=False).item()

                numeric = (upper - lower) / (2 * epsilon)
                error = abs(analytic[name][index] - numeric) / max(1.0, abs(numeric))
                worst = max(worst, float(error))
        finally:
            params.set_value(name, original)

    logger.debug(f"gradient check over {params.count()} entries: max relative error {worst:.3e}")
    return worst
