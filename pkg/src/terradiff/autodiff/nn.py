"""Small layer helpers on top of the autodiff ops.

Layers register their parameters in a shared :class:`ParameterSet` under a
dotted prefix (e.g. ``enc.b1.conv.weight``) at construction and look them
up by reference at call time. Initialization is He-normal for conv/linear
weights, zeros for biases, ones/zeros for norm scale/shift.
"""
from __future__ import annotations

import numpy as np

from . import ops
from .tensor import ParameterSet, Tensor

__all__ = [
    "he_normal", "Conv2d", "GroupNorm", "Linear", "timestep_embedding", "num_norm_groups",
]


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(np.float32)


def num_norm_groups(channels: int) -> int:
    """Group count for normalization: min(8, C), reduced until it divides C."""
    groups = min(8, channels)
    while channels % groups != 0:
        groups -= 1
    return groups


class Conv2d:
    def __init__(
        self,
        params: ParameterSet,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: int = 3,
        stride: int = 1,
        padding: int | None = None,
        rng: np.random.Generator | None = None,
        zero_init: bool = False,
        trainable: bool = True,
    ) -> None:
        if padding is None:
            padding = kernel // 2
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel * kernel
        if zero_init:
            w = np.zeros((out_channels, in_channels, kernel, kernel), dtype=np.float32)
        else:
            if rng is None:
                raise ValueError(f"layer {name!r} needs an rng unless zero_init")
            w = he_normal(rng, (out_channels, in_channels, kernel, kernel), fan_in)
        self.weight = params.add(f"{name}.weight", w, trainable=trainable)
        self.bias = params.add(f"{name}.bias", np.zeros(out_channels, dtype=np.float32), trainable=trainable)
        self.out_channels = out_channels

    def __call__(self, x: Tensor) -> Tensor:
        y = ops.conv2d(x, self.weight, stride=self.stride, padding=self.padding)
        b = ops.reshape(self.bias, (1, self.out_channels, 1, 1))
        return ops.add(y, b)


class GroupNorm:
    def __init__(
        self,
        params: ParameterSet,
        name: str,
        channels: int,
        eps: float = 1e-5,
        trainable: bool = True,
    ) -> None:
        self.num_groups = num_norm_groups(channels)
        self.eps = eps
        self.gamma = params.add(f"{name}.gamma", np.ones(channels, dtype=np.float32), trainable=trainable)
        self.beta = params.add(f"{name}.beta", np.zeros(channels, dtype=np.float32), trainable=trainable)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.group_norm(x, self.gamma, self.beta, num_groups=self.num_groups, eps=self.eps)


class Linear:
    def __init__(
        self,
        params: ParameterSet,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator | None = None,
        zero_init: bool = False,
        trainable: bool = True,
    ) -> None:
        if zero_init:
            w = np.zeros((in_features, out_features), dtype=np.float32)
        else:
            if rng is None:
                raise ValueError(f"layer {name!r} needs an rng unless zero_init")
            w = he_normal(rng, (in_features, out_features), in_features)
        self.weight = params.add(f"{name}.weight", w, trainable=trainable)
        self.bias = params.add(f"{name}.bias", np.zeros(out_features, dtype=np.float32), trainable=trainable)
        self.out_features = out_features

    def __call__(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight)
        b = ops.reshape(self.bias, (1, self.out_features))
        return ops.add(y, b)


def timestep_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of integer timesteps, shape (N, dim).

    Half sine, half cosine over geometrically spaced frequencies; the
    classic transformer positional encoding applied to diffusion steps.
    """
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / max(half - 1, 1))
    args = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], 1))], axis=1)
    return emb.astype(np.float32)
