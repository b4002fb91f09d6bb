from .tensor import (
    ShapeError,
    Tape,
    Tensor,
    absolute,
    add,
    as_tensor,
    cosine_basis,
    huber,
    matmul,
    mul,
    no_grad,
    pick,
    rectifier,
    reshape,
    sub,
    tmean,
    tsum,
)
from .nn import MlpParams
from .optim import NonFiniteGradientError, OptimizerState, optimizer_step, zero_grads

__all__ = [
    "ShapeError",
    "Tape",
    "Tensor",
    "absolute",
    "add",
    "as_tensor",
    "cosine_basis",
    "huber",
    "matmul",
    "mul",
    "no_grad",
    "pick",
    "rectifier",
    "reshape",
    "sub",
    "tmean",
    "tsum",
    "MlpParams",
    "NonFiniteGradientError",
    "OptimizerState",
    "optimizer_step",
    "zero_grads",
]
