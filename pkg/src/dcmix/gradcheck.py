"""Central finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tape, Tensor, backward


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    f must be scalar-valued and deterministic (verified by evaluating it
    twice). Runs in the dtype of x; callers wanting the documented 1e-4
    headroom should pass float64 inputs.
    """
    x = Tensor(x.data.astype(np.float64), requires_grad=True)
    with Tape() as tape:
        loss = f(x)
    if loss.data.shape != ():
        raise ValueError(f"grad_check requires a scalar-valued f, got shape {loss.data.shape}")
    repeat = f(Tensor(x.data.copy()))
    if not np.array_equal(loss.data, repeat.data):
        raise ValueError("grad_check: f is not deterministic (repeated evaluation differs)")
    backward(tape, loss)
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)

    flat = x.data.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f(Tensor(x.data.copy())).item()
        flat[i] = orig - eps
        f_minus = f(Tensor(x.data.copy())).item()
        flat[i] = orig
        numeric[i] = (f_plus - f_minus) / (2.0 * eps)

    a = analytic.reshape(-1)
    denom = np.maximum(1e-8, np.abs(a) + np.abs(numeric))
    return float(np.max(np.abs(a - numeric) / denom))
