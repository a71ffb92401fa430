"""Reverse-mode autodiff engine: tensors, ops, layers, optimizers."""
from .tensor import (
    ParameterSet,
    Tensor,
    backward,
    grad_of,
    is_grad_enabled,
    no_grad,
    set_finite_checks,
)
from .ops import (
    OP_KINDS,
    add,
    concat_channels,
    conv2d,
    downsample_stride2,
    exp,
    forward_op,
    group_norm,
    matmul,
    mean_all,
    mean_square,
    mul,
    reshape,
    scalar_affine,
    silu,
    slice_channels,
    split_channels,
    sub,
    upsample_nearest2,
)
from .nn import Conv2d, GroupNorm, Linear, he_normal, num_norm_groups, timestep_embedding
from .optim import AdamW, OptimizerState, adam_step, adamw_step

__all__ = [
    "Tensor", "ParameterSet", "backward", "grad_of", "no_grad", "is_grad_enabled",
    "set_finite_checks",
    "add", "sub", "mul", "matmul", "conv2d", "upsample_nearest2", "downsample_stride2",
    "group_norm", "silu", "mean_square", "mean_all", "concat_channels", "split_channels",
    "slice_channels", "scalar_affine", "exp", "reshape", "forward_op", "OP_KINDS",
    "Conv2d", "GroupNorm", "Linear", "he_normal", "num_norm_groups", "timestep_embedding",
    "AdamW", "OptimizerState", "adam_step", "adamw_step",
]
