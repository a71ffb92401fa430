"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Tensor` wraps a float32 or float64 ndarray. Operations (see
``ops.py``) link result tensors to their parents with a vector-Jacobian
closure; :func:`backward` walks that implicit tape once, in reverse
topological order, and accumulates gradients.

Design constraints honoured here:

* every op output is checked for NaN/Inf and raises immediately,
* a tape is single-use: calling :func:`backward` twice on the same loss
  raises,
* image tensors use NCHW layout throughout,
* tensors are treated as immutable once created; optimizers swap the
  ``data`` buffer of leaf parameters between steps, never graph nodes.
"""
from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ParameterSet",
    "backward",
    "grad_of",
    "no_grad",
    "is_grad_enabled",
    "set_finite_checks",
]

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

# Module switches. Finite checks are cheap relative to the convs they guard
# and turn silent numerical blowups into hard errors at the offending op.
_FINITE_CHECKS = True
_GRAD_ENABLED = True


def set_finite_checks(enabled: bool) -> bool:
    """Toggle per-op NaN/Inf validation. Returns the previous setting."""
    global _FINITE_CHECKS
    previous = _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)
    return previous


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextmanager
def no_grad():
    """Context manager that disables graph recording (e.g. for sampling loops)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def _as_float_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float32)
    return arr


def check_finite(arr: np.ndarray, context: str) -> None:
    """Raise FloatingPointError if ``arr`` contains NaN or Inf."""
    if _FINITE_CHECKS and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values produced by {context}")


class Tensor:
    """An ndarray plus the graph edge that produced it.

    Leaf tensors have no parents. ``requires_grad`` marks leaves whose
    gradient should be collected; interior nodes inherit it from parents.
    """

    __slots__ = ("data", "requires_grad", "_parents", "_vjp", "_op", "_backward_run")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: Sequence["Tensor"] = (),
        _vjp: Callable[[np.ndarray], tuple] | None = None,
        _op: str = "",
    ):
        self.data = _as_float_array(data)
        self.requires_grad = bool(requires_grad)
        self._parents = tuple(_parents)
        self._vjp = _vjp
        self._op = _op
        self._backward_run = False

    # -- convenience accessors ------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        """The underlying array. Treat as read-only."""
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        grad_flag = ", grad" if self.requires_grad else ""
        op = f", op={self._op}" if self._op else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{grad_flag}{op})"


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    vjp: Callable[[np.ndarray], tuple],
    op: str,
) -> Tensor:
    """Create an op result, recording the edge only when grads are on."""
    check_finite(data, op)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _vjp=vjp, _op=op)
    return Tensor(data, requires_grad=False)


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS over the parent DAG."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    return order


def grad_of(loss: Tensor, wrt: Iterable[Tensor]) -> list[np.ndarray | None]:
    """Gradients of a scalar ``loss`` w.r.t. each tensor in ``wrt``.

    Returns None for tensors the loss does not depend on. Raising on a
    reused tape keeps accidental double-backward from silently doubling
    gradients.
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._backward_run:
        raise RuntimeError("tape already consumed: backward was called on this loss before")
    loss._backward_run = True

    wrt = list(wrt)
    wrt_ids = {id(t) for t in wrt}
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.dtype)}
    if loss.requires_grad:
        for node in reversed(_topo_order(loss)):
            if id(node) in wrt_ids:
                grad_out = grads.get(id(node))
            else:
                # interior node: release its buffer once consumed
                grad_out = grads.pop(id(node), None)
            if grad_out is None or node._vjp is None:
                continue
            parent_grads = node._vjp(np.asarray(grad_out, dtype=node.dtype))
            for parent, pgrad in zip(node._parents, parent_grads):
                if pgrad is None or not parent.requires_grad:
                    continue
                check_finite(pgrad, f"backward of {node._op}")
                existing = grads.get(id(parent))
                if existing is None:
                    grads[id(parent)] = pgrad
                else:
                    grads[id(parent)] = existing + pgrad
            node._vjp = None  # free closure memory as we go

    return [grads.get(id(t)) for t in wrt]


class ParameterSet:
    """Named collection of leaf tensors with a trainable flag each.

    Names are unique and stable; they key checkpoint payloads, gradient
    maps and optimizer state.
    """

    def __init__(self) -> None:
        self._tensors: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name: {name!r}")
        tensor = Tensor(np.array(value, dtype=np.float32), requires_grad=trainable)
        self._tensors[name] = tensor
        self._trainable[name] = bool(trainable)
        return tensor

    @classmethod
    def union(cls, *sets: "ParameterSet") -> "ParameterSet":
        """One set over several, sharing the same tensors (no copies).

        Lets a single backward pass and optimizer drive parameters that
        live in separate sets (e.g. an encoder and a decoder). Trainable
        flags are snapshotted; freeze through the union afterwards.
        """
        merged = cls()
        for ps in sets:
            for name, t in ps._tensors.items():
                if name in merged._tensors:
                    raise ValueError(f"duplicate parameter name across sets: {name!r}")
                merged._tensors[name] = t
                merged._trainable[name] = ps._trainable[name]
        return merged

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def set_trainable(self, name: str, trainable: bool) -> None:
        self._trainable[name] = bool(trainable)
        self._tensors[name].requires_grad = bool(trainable)

    def trainable_names(self) -> list[str]:
        return [n for n, t in self._trainable.items() if t]

    def items(self):
        return self._tensors.items()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._tensors) - set(state)
        extra = set(state) - set(self._tensors)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, value in state.items():
            current = self._tensors[name]
            value = np.asarray(value, dtype=np.float32)
            if value.shape != current.data.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: checkpoint {value.shape} vs model {current.data.shape}"
                )
            current.data = value.copy()

    def parameter_count(self, trainable_only: bool = False) -> int:
        return sum(
            t.data.size
            for n, t in self._tensors.items()
            if not trainable_only or self._trainable[n]
        )


def backward(loss: Tensor, params: ParameterSet) -> dict[str, Tensor]:
    """Gradient map (name -> Tensor) of a scalar loss over ``params``.

    Parameters the loss does not reach get zero gradients of the right
    shape, so optimizers can treat the map as total.
    """
    names = params.names()
    raw = grad_of(loss, [params[n] for n in names])
    out: dict[str, Tensor] = {}
    for name, g in zip(names, raw):
        if g is None:
            out[name] = Tensor(np.zeros_like(params[name].data))
        else:
            out[name] = Tensor(np.asarray(g, dtype=params[name].dtype))
    return out
