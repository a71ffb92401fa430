"""Finite-difference gradient oracle used by the autodiff tests.

Independent of the engine's backward pass by construction: it evaluates
the op's *forward* path only, via central differences at 64-bit precision
with step 1e-5, and compares against the analytic gradients afterwards.
"""
from __future__ import annotations

import numpy as np

from terradiff.autodiff import Tensor, add, grad_of, mean_all, mul

FD_STEP = 1e-5
REL_TOL = 1e-4


def scalar_loss(op_fn, tensors, weights):
    """loss = sum_i mean(output_i * weight_i) as a graph scalar.

    Weighted means make the loss sensitive to every output entry with a
    distinct upstream gradient, which catches transposed or mirrored
    backward bugs a uniform sum would miss.
    """
    out = op_fn(*tensors)
    outputs = out if isinstance(out, tuple) else (out,)
    assert len(outputs) == len(weights)
    loss = None
    for o, w in zip(outputs, weights):
        term = mean_all(mul(o, Tensor(w)))
        loss = term if loss is None else add(loss, term)
    return loss


def numeric_loss(op_fn, arrays, weights):
    tensors = [Tensor(a) for a in arrays]
    out = op_fn(*tensors)
    outputs = out if isinstance(out, tuple) else (out,)
    total = 0.0
    for o, w in zip(outputs, weights):
        total += float(np.mean(o.data * w))
    return total


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(op_fn, arrays, rng: np.random.Generator, rel_tol: float = REL_TOL) -> float:
    """Compare engine backward vs central finite differences for one op call.

    ``arrays`` are float64 inputs; every one of them is differentiated.
    Returns the worst relative error across all inputs (and asserts it is
    within tolerance).
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    probe = op_fn(*tensors)
    outputs = probe if isinstance(probe, tuple) else (probe,)
    weights = [rng.normal(size=o.shape).astype(np.float64) for o in outputs]

    # analytic gradients through the engine
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = scalar_loss(op_fn, tensors, weights)
    analytic = grad_of(loss, tensors)

    worst = 0.0
    for idx, base in enumerate(arrays):
        numeric = np.zeros_like(base)
        flat_in = base.reshape(-1)
        flat_out = numeric.reshape(-1)
        for i in range(flat_in.size):
            saved = flat_in[i]
            flat_in[i] = saved + FD_STEP
            f_plus = numeric_loss(op_fn, arrays, weights)
            flat_in[i] = saved - FD_STEP
            f_minus = numeric_loss(op_fn, arrays, weights)
            flat_in[i] = saved
            flat_out[i] = (f_plus - f_minus) / (2.0 * FD_STEP)
        a = analytic[idx]
        a = np.zeros_like(base) if a is None else np.asarray(a)
        err = relative_error(a, numeric)
        worst = max(worst, err)
        assert err < rel_tol, f"gradient mismatch on input {idx}: rel err {err:.3e}"
    return worst
