from src.app.autodiff import functional
from src.app.autodiff.gradcheck import gradient_check
from src.app.autodiff.optim import sgd_step
from src.app.autodiff.params import ParamStore
from src.app.autodiff.tensor import GradNode, OpKind, Tensor, apply, backward

__all__ = [
    "GradNode",
    "OpKind",
    "ParamStore",
    "Tensor",
    "apply",
    "backward",
    "functional",
    "gradient_check",
    "sgd_step",
]
