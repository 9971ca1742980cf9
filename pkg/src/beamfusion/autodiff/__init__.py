"""Reverse-mode autodiff engine and the neural layers built on it."""

from .tensor import (
    Tensor,
    backward,
    concat,
    conv2d,
    dropout,
    exp,
    global_avgpool,
    log,
    mac_counter,
    matmul,
    maximum_scalar,
    maxpool2d,
    narrow,
    no_grad,
    pow_scalar,
    relu,
    reshape,
    softmax,
    tensor_mean,
    tensor_sum,
    transpose,
)
from .nn import (
    AttentionConfig,
    BatchNorm2d,
    Conv2d,
    LayerNorm,
    Linear,
    Module,
    MultiheadAttention,
    TransformerEncoderLayer,
    count_params,
)

__all__ = [
    "AttentionConfig",
    "BatchNorm2d",
    "Conv2d",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiheadAttention",
    "Tensor",
    "TransformerEncoderLayer",
    "backward",
    "concat",
    "conv2d",
    "count_params",
    "dropout",
    "exp",
    "global_avgpool",
    "log",
    "mac_counter",
    "matmul",
    "maximum_scalar",
    "maxpool2d",
    "narrow",
    "no_grad",
    "pow_scalar",
    "relu",
    "reshape",
    "softmax",
    "tensor_mean",
    "tensor_sum",
    "transpose",
]
