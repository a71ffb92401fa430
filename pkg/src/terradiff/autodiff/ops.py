"""Differentiable operations over :class:`~terradiff.autodiff.tensor.Tensor`.

Each op computes its forward value with numpy and registers a closure
returning gradients w.r.t. every parent. Shapes follow NCHW for images.
Convolution uses im2col plus a BLAS matmul; its backward scatters column
gradients back with a small fixed loop over kernel offsets.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, make_node

__all__ = [
    "add", "sub", "mul", "matmul", "conv2d", "upsample_nearest2", "downsample_stride2",
    "group_norm", "silu", "mean_square", "mean_all", "concat_channels", "split_channels",
    "slice_channels", "scalar_affine", "exp", "reshape", "forward_op", "OP_KINDS",
]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _coerce(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


# -- elementwise --------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return make_node(out, (a, b), vjp, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return make_node(out, (a, b), vjp, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return make_node(out, (a, b), vjp, "mul")


def scalar_affine(x: Tensor, scale: float, shift: float = 0.0) -> Tensor:
    x = _coerce(x)
    scale = float(scale)
    out = x.data * scale + np.asarray(shift, dtype=x.dtype)

    def vjp(g):
        return (g * scale,)

    return make_node(out, (x,), vjp, "scalar-affine")


def exp(x: Tensor) -> Tensor:
    x = _coerce(x)
    with np.errstate(over="ignore"):  # overflow becomes inf; the finite check raises
        out = np.exp(x.data)

    def vjp(g):
        return (g * out,)

    return make_node(out, (x,), vjp, "exp")


def silu(x: Tensor) -> Tensor:
    """Sigmoid-weighted linear unit: x * sigmoid(x)."""
    x = _coerce(x)
    with np.errstate(over="ignore"):  # exp(-x) -> inf is fine, sigmoid saturates to 0
        sig = 1.0 / (1.0 + np.exp(-x.data))
    out = x.data * sig

    def vjp(g):
        # d/dx [x*s(x)] = s(x) * (1 + x * (1 - s(x)))
        return (g * (sig * (1.0 + x.data * (1.0 - sig))),)

    return make_node(out, (x,), vjp, "silu")


# -- reductions ---------------------------------------------------------------

def mean_square(x: Tensor) -> Tensor:
    """Scalar mean of squared entries; the engine's MSE building block."""
    x = _coerce(x)
    out = np.mean(np.square(x.data))
    n = x.data.size

    def vjp(g):
        return (g * (2.0 / n) * x.data,)

    return make_node(np.asarray(out, dtype=x.dtype), (x,), vjp, "mean-square")


def mean_all(x: Tensor) -> Tensor:
    x = _coerce(x)
    out = np.mean(x.data)
    n = x.data.size

    def vjp(g):
        return (np.full(x.data.shape, g / n, dtype=x.dtype),)

    return make_node(np.asarray(out, dtype=x.dtype), (x,), vjp, "mean")


# -- shape plumbing ------------------------------------------------------------

def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _coerce(x)
    out = x.data.reshape(shape)
    original = x.data.shape

    def vjp(g):
        return (g.reshape(original),)

    return make_node(out, (x,), vjp, "reshape")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along axis 1 (channels)."""
    a, b = _coerce(a), _coerce(b)
    if a.data.ndim != b.data.ndim:
        raise ValueError("concat_channels requires equal ranks")
    ca = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def vjp(g):
        return g[:, :ca], g[:, ca:]

    return make_node(out, (a, b), vjp, "channel-concat")


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    x = _coerce(x)
    if not (0 <= start < stop <= x.data.shape[1]):
        raise ValueError(f"bad channel slice [{start}:{stop}] for {x.data.shape}")
    out = np.ascontiguousarray(x.data[:, start:stop])

    def vjp(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        return (full,)

    return make_node(out, (x,), vjp, "channel-split")


def split_channels(x: Tensor, sizes: tuple[int, ...]) -> tuple[Tensor, ...]:
    """Split along axis 1 into consecutive chunks of the given sizes."""
    x = _coerce(x)
    if sum(sizes) != x.data.shape[1]:
        raise ValueError(f"split sizes {sizes} do not cover {x.data.shape[1]} channels")
    parts = []
    offset = 0
    for size in sizes:
        parts.append(slice_channels(x, offset, offset + size))
        offset += size
    return tuple(parts)


# -- linear algebra ------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul supports 2-D operands only")
    out = a.data @ b.data

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return make_node(out, (a, b), vjp, "matmul")


# -- spatial ops ---------------------------------------------------------------

def _im2col(x_padded: np.ndarray, kh: int, kw: int, stride: int):
    """(N,C,Hp,Wp) -> contiguous (N, C*kh*kw, OH*OW) column matrix."""
    windows = sliding_window_view(x_padded, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    n, c, oh, ow = windows.shape[:4]
    cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols), oh, ow


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation, NCHW input, OIHW weight, zero padding."""
    x, weight = _coerce(x), _coerce(weight)
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError("conv2d expects 4-D input and weight")
    n, c, h, w = x.data.shape
    oc, ic, kh, kw = weight.data.shape
    if ic != c:
        raise ValueError(f"conv2d channel mismatch: input {c} vs weight {ic}")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d requires stride >= 1 and padding >= 0")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ValueError("conv2d kernel larger than padded input")

    if padding:
        x_padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        x_padded = x.data
    cols, oh, ow = _im2col(x_padded, kh, kw, stride)
    w2 = weight.data.reshape(oc, ic * kh * kw)
    out = np.matmul(w2, cols).reshape(n, oc, oh, ow)

    hp, wp = x_padded.shape[2], x_padded.shape[3]

    def vjp(g):
        gy = g.reshape(n, oc, oh * ow)
        grad_w = np.matmul(gy, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.data.shape)
        grad_cols = np.matmul(w2.T, gy)  # (N, C*kh*kw, OH*OW)
        grad_6d = grad_cols.reshape(n, c, kh, kw, oh, ow)
        grad_xp = np.zeros((n, c, hp, wp), dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += grad_6d[:, :, i, j]
        if padding:
            grad_x = grad_xp[:, :, padding : padding + h, padding : padding + w]
        else:
            grad_x = grad_xp
        return grad_x, grad_w

    return make_node(out, (x, weight), vjp, "conv2d")


def upsample_nearest2(x: Tensor) -> Tensor:
    """Nearest-neighbour 2x spatial upsampling."""
    x = _coerce(x)
    if x.data.ndim != 4:
        raise ValueError("upsample_nearest2 expects NCHW input")
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    n, c, h, w = x.data.shape

    def vjp(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return make_node(out, (x,), vjp, "nearest-upsample-2x")


def downsample_stride2(x: Tensor) -> Tensor:
    """Keep every second row/column (top-left phase)."""
    x = _coerce(x)
    if x.data.ndim != 4:
        raise ValueError("downsample_stride2 expects NCHW input")
    out = np.ascontiguousarray(x.data[:, :, ::2, ::2])

    def vjp(g):
        full = np.zeros_like(x.data)
        full[:, :, ::2, ::2] = g
        return (full,)

    return make_node(out, (x,), vjp, "strided-downsample-2x")


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor, num_groups: int, eps: float = 1e-5) -> Tensor:
    """Group normalization over channel groups of an NCHW tensor."""
    x, gamma, beta = _coerce(x), _coerce(gamma), _coerce(beta)
    n, c, h, w = x.data.shape
    if c % num_groups != 0:
        raise ValueError(f"channels {c} not divisible by groups {num_groups}")
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ValueError("group_norm gamma/beta must have shape (C,)")

    grouped = x.data.reshape(n, num_groups, -1)
    mu = grouped.mean(axis=2, keepdims=True)
    var = grouped.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat_g = (grouped - mu) * inv_std
    xhat = xhat_g.reshape(n, c, h, w)
    gamma_b = gamma.data.reshape(1, c, 1, 1)
    out = xhat * gamma_b + beta.data.reshape(1, c, 1, 1)
    m = grouped.shape[2]  # elements per group

    def vjp(g):
        grad_gamma = (g * xhat).sum(axis=(0, 2, 3))
        grad_beta = g.sum(axis=(0, 2, 3))
        dxhat = (g * gamma_b).reshape(n, num_groups, m)
        mean_dxhat = dxhat.mean(axis=2, keepdims=True)
        mean_dxhat_xhat = (dxhat * xhat_g).mean(axis=2, keepdims=True)
        dx = inv_std * (dxhat - mean_dxhat - xhat_g * mean_dxhat_xhat)
        return dx.reshape(n, c, h, w), grad_gamma, grad_beta

    return make_node(out, (x, gamma, beta), vjp, "group-normalization")


# -- generic dispatch -----------------------------------------------------------

OP_KINDS = {
    "add": lambda inputs, attrs: add(*inputs),
    "sub": lambda inputs, attrs: sub(*inputs),
    "mul": lambda inputs, attrs: mul(*inputs),
    "matmul": lambda inputs, attrs: matmul(*inputs),
    "conv2d": lambda inputs, attrs: conv2d(
        inputs[0], inputs[1], stride=attrs.get("stride", 1), padding=attrs.get("padding", 0)
    ),
    "nearest-upsample-2x": lambda inputs, attrs: upsample_nearest2(inputs[0]),
    "strided-downsample-2x": lambda inputs, attrs: downsample_stride2(inputs[0]),
    "group-normalization": lambda inputs, attrs: group_norm(
        inputs[0], inputs[1], inputs[2], num_groups=attrs["num_groups"], eps=attrs.get("eps", 1e-5)
    ),
    "silu": lambda inputs, attrs: silu(inputs[0]),
    "mean-square": lambda inputs, attrs: mean_square(inputs[0]),
    "mean": lambda inputs, attrs: mean_all(inputs[0]),
    "channel-concat": lambda inputs, attrs: concat_channels(*inputs),
    "channel-split": lambda inputs, attrs: split_channels(inputs[0], tuple(attrs["sizes"])),
    "scalar-affine": lambda inputs, attrs: scalar_affine(
        inputs[0], attrs["scale"], attrs.get("shift", 0.0)
    ),
    "exp": lambda inputs, attrs: exp(inputs[0]),
    "reshape": lambda inputs, attrs: reshape(inputs[0], tuple(attrs["shape"])),
}


def forward_op(kind: str, inputs, attrs: dict | None = None):
    """Dispatch an op by kind name; unknown kinds raise ValueError."""
    if kind not in OP_KINDS:
        raise ValueError(f"unknown op kind: {kind!r}")
    return OP_KINDS[kind](list(inputs), attrs or {})
