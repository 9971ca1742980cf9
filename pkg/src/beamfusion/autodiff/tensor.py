"""Dense-tensor reverse-mode autodiff engine on numpy arrays.

Every operation records its inputs and a backward closure on the output
node; ``backward`` walks the graph in exact reverse topological order and
delivers each leaf's accumulated gradient exactly once.  Calling backward a
second time on the same output, or onto parameters whose gradients were not
cleared, raises instead of silently accumulating.

Float32 is the training dtype; tests run the same graphs in float64 so
finite-difference checks can resolve 1e-6 relative error.  Any op producing
NaN/Inf raises ``NumericError`` immediately.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import NumericError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation fast path)."""
    global _grad_enabled
    old = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = old


class MacCounter:
    """Tally of multiplies executed by conv2d/matmul while enabled.

    Used to cross-check the analytic complexity counter: elementwise ops,
    normalizations, and softmax are excluded by convention on both sides.
    """

    def __init__(self):
        self.enabled = False
        self.total = 0

    def add(self, count: int) -> None:
        if self.enabled:
            self.total += int(count)

    @contextmanager
    def count(self):
        """Tally multiplies inside the block; read .total afterwards.

        Not reentrant: entering resets the tally.
        """
        old_enabled = self.enabled
        self.enabled = True
        self.total = 0
        try:
            yield self
        finally:
            self.enabled = old_enabled


mac_counter = MacCounter()


def _check_finite(data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError("operation produced NaN or Inf")


class Tensor:
    """N-dimensional value with an optional gradient record."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_done")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        self._done = False
        if requires_grad:
            _check_finite(arr)

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other, self.dtype))

    def __radd__(self, other):
        return add(_lift(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _lift(other, self.dtype))

    def __rsub__(self, other):
        return sub(_lift(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _lift(other, self.dtype))

    def __rmul__(self, other):
        return mul(_lift(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _lift(other, self.dtype))

    def __rtruediv__(self, other):
        return div(_lift(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis, keepdims)


def _lift(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Wrap an op result, recording the graph edge when gradients are live."""
    _check_finite(data)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._done = False
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out._parents = parents
        out._backward_fn = backward_fn
    else:
        out._parents = ()
        out._backward_fn = None
    return out


def _sum_to_shape(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse-mode gradients of a scalar loss.

    Returns the gradient map for every requires_grad leaf reached, and also
    stores it in each leaf's ``.grad``.  Raises if called twice on the same
    output or if a leaf already holds a gradient (clear first).
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._done:
        raise RuntimeError("backward already called on this tensor")
    loss._done = True
    if not loss.requires_grad:
        raise ValueError("loss does not require grad; nothing to differentiate")

    # Iterative topological order over the recorded graph.
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaf_grads: dict[Tensor, np.ndarray] = {}
    for node in reversed(order):
        grad_out = grads.pop(id(node), None)
        if grad_out is None:
            continue
        if node._backward_fn is None:
            leaf_grads[node] = grad_out
            continue
        parent_grads = node._backward_fn(grad_out)
        for parent, pgrad in zip(node._parents, parent_grads):
            if pgrad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pgrad
            else:
                grads[key] = pgrad

    for leaf, grad in leaf_grads.items():
        if leaf.grad is not None:
            raise RuntimeError("leaf already holds a gradient; zero it before backward")
        leaf.grad = grad
    return leaf_grads


# ---------------------------------------------------------------------------
# elementwise and shape primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data
    return _make(data, (a, b), lambda g: (_sum_to_shape(g, a.shape), _sum_to_shape(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data
    return _make(data, (a, b), lambda g: (_sum_to_shape(g, a.shape), _sum_to_shape(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data
    return _make(
        data,
        (a, b),
        lambda g: (_sum_to_shape(g * b.data, a.shape), _sum_to_shape(g * a.data, b.shape)),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data
    return _make(
        data,
        (a, b),
        lambda g: (
            _sum_to_shape(g / b.data, a.shape),
            _sum_to_shape(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def pow_scalar(a: Tensor, exponent: float) -> Tensor:
    """a ** p for a real scalar exponent.

    The derivative p * a**(p-1) is clamped to 0 where a == 0, which is the
    correct subgradient for p >= 1 and keeps p in [0, 1) finite.
    """
    data = np.power(a.data, exponent)

    def _backward(g):
        if exponent == 0.0:
            return (np.zeros_like(a.data),)
        base = np.where(a.data != 0.0, a.data, 1.0)
        local = exponent * np.power(base, exponent - 1.0)
        local = np.where(a.data != 0.0, local, 0.0)
        return (g * local,)

    return _make(data, (a,), _backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)
    return _make(data, (a,), lambda g: (g * data,))


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)
    return _make(data, (a,), lambda g: (g / a.data,))


def maximum_scalar(a: Tensor, floor: float) -> Tensor:
    """Elementwise max(a, floor); gradient passes where a >= floor."""
    data = np.maximum(a.data, floor)
    return _make(data, (a,), lambda g: (g * (a.data >= floor),))


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)
    return _make(data, (a,), lambda g: (g * (a.data > 0.0),))


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape) if not isinstance(shape, int) else (shape,)
    data = a.data.reshape(shape)
    return _make(data, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = np.transpose(a.data, axes)
    return _make(data, (a,), lambda g: (np.transpose(g, inverse),))


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def _backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_exp, a.shape).copy(),)

    return _make(np.asarray(data), (a,), _backward)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    total = tensor_sum(a, axis, keepdims)
    return mul(total, Tensor(np.asarray(1.0 / count, dtype=a.dtype)))


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _backward(g):
        slicer = [slice(None)] * g.ndim
        grads = []
        for i in range(len(tensors)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(slicer)])
        return tuple(grads)

    return _make(data, tuple(tensors), _backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    slicer = [slice(None)] * a.data.ndim
    slicer[axis] = slice(start, start + length)
    data = a.data[tuple(slicer)].copy()

    def _backward(g):
        full = np.zeros_like(a.data)
        full[tuple(slicer)] = g
        return (full,)

    return _make(data, (a,), _backward)


# ---------------------------------------------------------------------------
# matmul / softmax / dropout
# ---------------------------------------------------------------------------

def _swap_last(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the trailing two axes."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul operands must have rank >= 2")
    data = a.data @ b.data
    m, k = a.shape[-2], a.shape[-1]
    p = b.shape[-1]
    batch = int(np.prod(data.shape[:-2])) if data.ndim > 2 else 1
    mac_counter.add(batch * m * k * p)

    def _backward(g):
        da = _sum_to_shape(g @ _swap_last(b.data), a.shape)
        db = _sum_to_shape(_swap_last(a.data) @ g, b.shape)
        return (da, db)

    return _make(data, (a, b), _backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along an axis (max-subtracted)."""
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ValueError(f"softmax axis {axis} out of range for shape {a.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def _backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - inner),)

    return _make(data, (a,), _backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout: scales by 1/(1-rate) at train time, no-op in eval."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return _make(a.data.copy(), (a,), lambda g: (g,))
    keep = (rng.random(a.shape) >= rate).astype(a.dtype)
    scale = np.asarray(1.0 / (1.0 - rate), dtype=a.dtype)
    mask = keep * scale
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# spatial primitives
# ---------------------------------------------------------------------------

def _conv_windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    n, c, h, w = x.shape
    h_out = (h - kh) // stride + 1
    w_out = (w - kw) // stride + 1
    sn, sc, sh, sw = x.strides
    return as_strided(
        x,
        shape=(n, c, kh, kw, h_out, w_out),
        strides=(sn, sc, sh, sw, sh * stride, sw * stride),
    )


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with (C_out, C_in, kh, kw) weights."""
    n, c_in, h, w = x.shape
    c_out, c_in_w, kh, kw = weight.shape
    if c_in != c_in_w:
        raise ValueError(f"conv2d channel mismatch: input {c_in}, weight {c_in_w}")
    if bias is not None and bias.shape != (c_out,):
        raise ValueError(f"conv2d bias shape {bias.shape} != ({c_out},)")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out <= 0 or w_out <= 0:
        raise ValueError(f"conv2d output would be empty for input {x.shape}, kernel {kh}x{kw}")

    windows = _conv_windows(xp, kh, kw, stride)
    cols = windows.reshape(n, c_in * kh * kw, h_out * w_out)
    w2 = weight.data.reshape(c_out, c_in * kh * kw)
    out = (w2 @ cols).reshape(n, c_out, h_out, w_out)
    mac_counter.add(n * c_out * h_out * w_out * c_in * kh * kw)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def _backward(g):
        g2 = g.reshape(n, c_out, h_out * w_out)
        dw = np.einsum("nol,nkl->ok", g2, cols).reshape(weight.shape)
        dcols = np.einsum("ok,nol->nkl", w2, g2).reshape(n, c_in, kh, kw, h_out, w_out)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + stride * h_out : stride, j : j + stride * w_out : stride] += dcols[:, :, i, j]
        dx = dxp[:, :, padding : padding + h, padding : padding + w] if padding else dxp
        db = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return (dx, dw, db)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    if bias is None:
        return _make(out, parents, lambda g: _backward(g)[:2])
    return _make(out, parents, _backward)


def maxpool2d(x: Tensor, kernel: int, stride: int | None = None, padding: int = 0) -> Tensor:
    """Max pooling; gradient is routed only to each window's argmax."""
    stride = stride or kernel
    n, c, h, w = x.shape
    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)), constant_values=-np.inf)
    else:
        xp = x.data
    h_out = (xp.shape[2] - kernel) // stride + 1
    w_out = (xp.shape[3] - kernel) // stride + 1
    if h_out <= 0 or w_out <= 0:
        raise ValueError(f"maxpool2d output would be empty for input {x.shape}, kernel {kernel}")
    windows = _conv_windows(xp, kernel, kernel, stride)  # (n, c, k, k, h_out, w_out)
    flat = windows.reshape(n, c, kernel * kernel, h_out, w_out)
    arg = flat.argmax(axis=2)
    out = np.take_along_axis(flat, arg[:, :, None], axis=2)[:, :, 0]

    def _backward(g):
        dxp = np.zeros_like(xp)
        for idx in range(kernel * kernel):
            i, j = divmod(idx, kernel)
            mask = (arg == idx) * g
            dxp[:, :, i : i + stride * h_out : stride, j : j + stride * w_out : stride] += mask
        if padding:
            return (dxp[:, :, padding : padding + h, padding : padding + w],)
        return (dxp,)

    return _make(out, (x,), _backward)


def global_avgpool(x: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, C) spatial mean."""
    return tensor_mean(x, axis=(2, 3))
