"""Neural layers over the tensor engine.

Layers own their parameters as ``Tensor``s with requires_grad=True and are
initialized from an explicit numpy Generator, so models are reproducible
from a seed.  ``Module`` provides parameter traversal, train/eval mode, and
flat state dictionaries used by checkpoints and weight averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Minimal container: tracks submodules/parameters in definition order."""

    def __init__(self):
        self.training = True

    def modules(self):
        for value in self.__dict__.values():
            if isinstance(value, Module):
                yield value
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield item

    def named_parameters(self, prefix: str = ""):
        for name, value in self.__dict__.items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def named_buffers(self, prefix: str = ""):
        for name, value in self.__dict__.items():
            if isinstance(value, np.ndarray):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_buffers(prefix + name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{prefix}{name}.{i}.")

    def train(self, mode: bool = True):
        self.training = mode
        for m in self.modules():
            m.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state["buffer." + name] = buf.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        for name, value in state.items():
            if name.startswith("buffer."):
                target = buffers[name[len("buffer.") :]]
                if target.shape != value.shape:
                    raise ValueError(f"buffer {name} shape {value.shape} != {target.shape}")
                target[...] = value
            else:
                p = params[name]
                if p.data.shape != value.shape:
                    raise ValueError(f"param {name} shape {value.shape} != {p.data.shape}")
                p.data = value.astype(p.data.dtype, copy=True)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        bound = 1.0 / math.sqrt(in_features)
        self.weight = Tensor(
            rng.uniform(-bound, bound, size=(in_features, out_features)).astype(dtype),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True)
        self.in_features = in_features
        self.out_features = out_features

    def forward(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.weight) + self.bias

    def macs(self, n_rows: int) -> int:
        return n_rows * self.in_features * self.out_features


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
        dtype=np.float32,
    ):
        super().__init__()
        fan_in = in_channels * kernel_size * kernel_size
        std = math.sqrt(2.0 / fan_in)
        self.weight = Tensor(
            rng.normal(0.0, std, size=(out_channels, in_channels, kernel_size, kernel_size)).astype(dtype),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True) if bias else None
        self.stride = stride
        self.padding = padding
        self.kernel_size = kernel_size
        self.in_channels = in_channels
        self.out_channels = out_channels

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def named_parameters(self, prefix: str = ""):
        yield prefix + "weight", self.weight
        if self.bias is not None:
            yield prefix + "bias", self.bias

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        k, s, p = self.kernel_size, self.stride, self.padding
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def macs(self, h: int, w: int) -> int:
        h_out, w_out = self.out_hw(h, w)
        return self.out_channels * h_out * w_out * self.in_channels * self.kernel_size**2


class BatchNorm2d(Module):
    """Per-channel batch normalization with running statistics.

    Train mode normalizes with (biased) batch statistics and updates the
    running estimates; eval mode normalizes with the running estimates.
    """

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.gamma = Tensor(np.ones(num_features, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.num_features = num_features

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 4 or x.shape[1] != self.num_features:
            raise ValueError(f"batchnorm expects (N, {self.num_features}, H, W), got {x.shape}")
        if self.training:
            mean = T.tensor_mean(x, axis=(0, 2, 3), keepdims=True)
            centered = x - mean
            var = T.tensor_mean(T.mul(centered, centered), axis=(0, 2, 3), keepdims=True)
            self.running_mean = (
                (1 - self.momentum) * self.running_mean + self.momentum * mean.data.reshape(-1)
            ).astype(self.running_mean.dtype)
            self.running_var = (
                (1 - self.momentum) * self.running_var + self.momentum * var.data.reshape(-1)
            ).astype(self.running_var.dtype)
            inv = T.pow_scalar(var + Tensor(np.asarray(self.eps, dtype=x.dtype)), -0.5)
            xhat = T.mul(centered, inv)
        else:
            mean = Tensor(self.running_mean.reshape(1, -1, 1, 1).astype(x.dtype))
            inv_data = 1.0 / np.sqrt(self.running_var.reshape(1, -1, 1, 1).astype(x.dtype) + x.dtype.type(self.eps))
            xhat = T.mul(x - mean, Tensor(inv_data))
        g = T.reshape(self.gamma, (1, self.num_features, 1, 1))
        b = T.reshape(self.beta, (1, self.num_features, 1, 1))
        return T.mul(xhat, g) + b


class LayerNorm(Module):
    """Normalization over the last axis with learnable affine."""

    def __init__(self, dim: int, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.gamma = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
        self.eps = eps
        self.dim = dim

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.dim:
            raise ValueError(f"layernorm expects last dim {self.dim}, got {x.shape}")
        mean = T.tensor_mean(x, axis=-1, keepdims=True)
        centered = x - mean
        var = T.tensor_mean(T.mul(centered, centered), axis=-1, keepdims=True)
        inv = T.pow_scalar(var + Tensor(np.asarray(self.eps, dtype=x.dtype)), -0.5)
        return T.mul(T.mul(centered, inv), self.gamma) + self.beta


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int
    n_heads: int
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.model_dim % self.n_heads != 0:
            raise ValueError(f"model_dim {self.model_dim} not divisible by n_heads {self.n_heads}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.n_heads


class MultiheadAttention(Module):
    """Scaled dot-product attention with linear Q/K/V/output projections.

    Inputs are (B, T, D); all token sets here are short and fully visible,
    so no masking is supported.
    """

    def __init__(self, cfg: AttentionConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        d = cfg.model_dim
        self.q_proj = Linear(d, d, rng, dtype)
        self.k_proj = Linear(d, d, rng, dtype)
        self.v_proj = Linear(d, d, rng, dtype)
        self.out_proj = Linear(d, d, rng, dtype)
        self.cfg = cfg
        self._drop_rng = np.random.Generator(np.random.PCG64(rng.integers(2**63)))

    def _split_heads(self, x: Tensor, b: int, t: int) -> Tensor:
        x = T.reshape(x, (b, t, self.cfg.n_heads, self.cfg.head_dim))
        return T.transpose(x, (0, 2, 1, 3))

    def forward(self, q_in: Tensor, k_in: Tensor, v_in: Tensor) -> Tensor:
        if not (q_in.shape[-1] == k_in.shape[-1] == v_in.shape[-1] == self.cfg.model_dim):
            raise ValueError(
                f"attention expects model_dim {self.cfg.model_dim}, got "
                f"{q_in.shape[-1]}/{k_in.shape[-1]}/{v_in.shape[-1]}"
            )
        if k_in.shape[1] != v_in.shape[1]:
            raise ValueError(f"key/value token counts differ: {k_in.shape[1]} vs {v_in.shape[1]}")
        b, t_q, _ = q_in.shape
        t_k = k_in.shape[1]
        q = self._split_heads(self.q_proj(q_in), b, t_q)
        k = self._split_heads(self.k_proj(k_in), b, t_k)
        v = self._split_heads(self.v_proj(v_in), b, t_k)
        scale = Tensor(np.asarray(1.0 / math.sqrt(self.cfg.head_dim), dtype=q_in.dtype))
        scores = T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), scale)
        weights = T.softmax(scores, axis=-1)
        if self.cfg.dropout_rate > 0.0:
            weights = T.dropout(weights, self.cfg.dropout_rate, self._drop_rng, self.training)
        mixed = T.matmul(weights, v)  # (B, H, T_q, head_dim)
        merged = T.reshape(T.transpose(mixed, (0, 2, 1, 3)), (b, t_q, self.cfg.model_dim))
        return self.out_proj(merged)

    def macs(self, b: int, t: int) -> int:
        d, h, hd = self.cfg.model_dim, self.cfg.n_heads, self.cfg.head_dim
        projections = 4 * b * t * d * d
        attention = 2 * b * h * t * t * hd
        return projections + attention


class TransformerEncoderLayer(Module):
    """Pre-norm encoder block: self-attention then a 2-layer MLP, residual."""

    def __init__(
        self,
        cfg: AttentionConfig,
        rng: np.random.Generator,
        ff_ratio: int = 4,
        dtype=np.float32,
    ):
        super().__init__()
        d = cfg.model_dim
        self.norm1 = LayerNorm(d, dtype=dtype)
        self.attn = MultiheadAttention(cfg, rng, dtype)
        self.norm2 = LayerNorm(d, dtype=dtype)
        self.ff1 = Linear(d, ff_ratio * d, rng, dtype)
        self.ff2 = Linear(ff_ratio * d, d, rng, dtype)
        self.ff_ratio = ff_ratio

    def forward(self, x: Tensor) -> Tensor:
        normed = self.norm1(x)
        x = x + self.attn(normed, normed, normed)
        x = x + self.ff2(T.relu(self.ff1(self.norm2(x))))
        return x

    def macs(self, b: int, t: int) -> int:
        d = self.attn.cfg.model_dim
        ff = 2 * b * t * d * (self.ff_ratio * d)
        return self.attn.macs(b, t) + ff


def count_params(module: Module) -> int:
    return sum(p.size for p in module.parameters())
