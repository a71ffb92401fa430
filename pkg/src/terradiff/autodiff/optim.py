"""Adam and AdamW over a :class:`ParameterSet`.

AdamW applies decoupled weight decay: parameters are shrunk by
``lr * weight_decay`` multiplicatively before the Adam update, so decay
never leaks into the moment estimates. Adam is AdamW with zero decay.
State (first/second moments plus step count) is a plain dict of arrays so
checkpoints can persist it and training can resume bit-exactly.
"""
from __future__ import annotations

import numpy as np

from .tensor import ParameterSet, Tensor

__all__ = ["OptimizerState", "adamw_step", "adam_step", "AdamW"]


class OptimizerState:
    """First/second moment buffers keyed by parameter name, plus step count."""

    def __init__(self) -> None:
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step: int = 0

    def ensure(self, name: str, shape: tuple[int, ...]) -> None:
        if name not in self.m:
            self.m[name] = np.zeros(shape, dtype=np.float32)
            self.v[name] = np.zeros(shape, dtype=np.float32)

    def state_dict(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, arr in self.m.items():
            out[f"opt.m.{name}"] = arr.copy()
        for name, arr in self.v.items():
            out[f"opt.v.{name}"] = arr.copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray], step: int) -> None:
        self.m = {k[len("opt.m."):]: np.asarray(v, dtype=np.float32).copy()
                  for k, v in state.items() if k.startswith("opt.m.")}
        self.v = {k[len("opt.v."):]: np.asarray(v, dtype=np.float32).copy()
                  for k, v in state.items() if k.startswith("opt.v.")}
        self.step = int(step)


def adamw_step(
    params: ParameterSet,
    grads: dict[str, Tensor],
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One AdamW update over the trainable parameters, in place.

    Zero gradients with nonzero decay still shrink the parameter: decay is
    decoupled from the gradient signal by design.
    """
    state.step += 1
    t = state.step
    bias1 = 1.0 - beta1 ** t
    bias2 = 1.0 - beta2 ** t
    for name in params.trainable_names():
        p = params[name]
        g = grads[name].data.astype(np.float32, copy=False)
        state.ensure(name, p.data.shape)
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


def adam_step(
    params: ParameterSet,
    grads: dict[str, Tensor],
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Adam is AdamW without the decoupled decay term."""
    adamw_step(params, grads, state, lr, beta1, beta2, eps, weight_decay=0.0)


class AdamW:
    """Thin stateful wrapper bundling hyperparameters with an OptimizerState."""

    def __init__(
        self,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> None:
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.state = OptimizerState()

    def step(self, params: ParameterSet, grads: dict[str, Tensor]) -> None:
        adamw_step(
            params, grads, self.state,
            lr=self.lr, beta1=self.beta1, beta2=self.beta2,
            eps=self.eps, weight_decay=self.weight_decay,
        )
