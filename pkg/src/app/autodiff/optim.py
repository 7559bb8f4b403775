from src.app.autodiff.params import ParamStore
from src.app.core.errors import DomainError


def sgd_step(params: ParamStore, lr: float) -> ParamStore:
    """Plain SGD: value <- value - lr * grad for every entry, then zero the accumulators."""
    if not lr > 0:
        raise DomainError(f"learning rate must be > 0, got {lr}")

    step = params.dtype.type(lr)
    for name in params.names():
        params.set_value(name, params.value(name) - step * params.grad(name))
    params.zero_grad()
    return params
