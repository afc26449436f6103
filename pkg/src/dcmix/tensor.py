"""Tape-based reverse-mode autodiff on numpy arrays.

Tensors are NHWC row-major numpy arrays (float32 by default, float64 for
gradient checking). Operations record themselves on the innermost active
Tape; backward() replays the tape in reverse and accumulates gradients
additively across fan-out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Shape mismatch between operands, with the offending axes named."""


class NonFiniteError(FloatingPointError):
    """A forward or backward pass produced NaN or Inf."""


# Toggle for the per-op finiteness assertion. Cheap relative to the matmuls
# involved, so it stays on by default.
FINITE_CHECKS = True

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """A shaped float array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"


@dataclass
class OpRecord:
    """One recorded operation: inputs, output, and its backward rule.

    backward maps the output gradient to one gradient array per input
    (None for inputs that do not need a gradient).
    """

    name: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Tape:
    """Ordered operation record; inputs always precede their consumers."""

    records: list[OpRecord] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.pop()


_TAPE_STACK: list[Tape] = []


def active_tape() -> Optional[Tape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def check_finite(arr: np.ndarray, op: str) -> None:
    if FINITE_CHECKS and not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in output of {op}")


def record(name: str, inputs: Sequence[Tensor], output: Tensor, backward) -> Tensor:
    """Register an op on the active tape if any input participates in autodiff."""
    check_finite(output.data, name)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        tape.records.append(OpRecord(name, tuple(inputs), output, backward))
    return output


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate .grad for every requires_grad tensor reachable from loss."""
    if loss.data.shape != ():
        raise DimensionError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if tape.records and loss is not tape.records[-1].output:
        if not any(rec.output is loss for rec in tape.records):
            raise ValueError("loss tensor was not produced on this tape")
    loss.grad = np.ones((), dtype=loss.dtype)
    for rec in reversed(tape.records):
        out_grad = rec.output.grad
        if out_grad is None:
            continue
        input_grads = rec.backward(out_grad)
        for tensor, g in zip(rec.inputs, input_grads):
            if g is None or not tensor.requires_grad:
                continue
            check_finite(g, f"{rec.name} (backward)")
            if tensor.grad is None:
                tensor.grad = np.zeros_like(tensor.data)
            tensor.grad += g.astype(tensor.dtype, copy=False).reshape(tensor.shape)


def result_dtype(*tensors: Tensor):
    return np.result_type(*(t.dtype for t in tensors))
