"""Reverse-mode automatic differentiation over dense float64 arrays."""

from .gradcheck import grad_check
from .ops import (
    add,
    concat,
    conv1d_causal,
    cross_entropy,
    dropout,
    hadamard,
    index,
    leaky_relu,
    matmul,
    mean_rows,
    mul,
    relu,
    reshape,
    segment_softmax,
    sigmoid,
    softmax_rows,
    spmm,
    sub,
    sum,
    take_rows,
    tanh,
    transpose,
)
from .tensor import (
    TapeNode,
    Tensor,
    as_tensor,
    backward,
    grad_enabled,
    make_op,
    no_grad,
    set_finite_check,
    zero_grad,
)

__all__ = [
    "Tensor", "TapeNode", "as_tensor", "backward", "grad_enabled", "make_op", "no_grad",
    "set_finite_check", "zero_grad", "grad_check",
    "add", "sub", "mul", "hadamard", "matmul", "spmm", "sum", "mean_rows", "reshape",
    "transpose", "index", "take_rows", "concat", "sigmoid", "tanh", "relu", "leaky_relu",
    "softmax_rows", "segment_softmax", "dropout", "conv1d_causal", "cross_entropy",
]
