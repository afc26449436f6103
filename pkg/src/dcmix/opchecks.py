"""Registered finite-difference checks, one per differentiable op.

Each check builds a small random float64 problem, reduces the op to a
scalar through sum_all, and reports the max relative gradient error from
grad_check. Used by the gradcheck CLI verb and the test suite.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import mixing, ops
from .attention import AttentionHead, attention_blend
from .gradcheck import grad_check
from .tensor import Tensor


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def check_conv2d(seed: int) -> float:
    r = _rng(seed)
    kernel = Tensor(r.normal(size=(3, 3, 2, 3)), dtype=np.float64)
    bias = Tensor(r.normal(size=3), dtype=np.float64)
    x0 = Tensor(r.normal(size=(2, 5, 5, 2)), dtype=np.float64)
    errs = [
        grad_check(lambda x: ops.sum_all(ops.conv2d(x, kernel, bias, stride=2, padding=1)), x0),
        grad_check(lambda k: ops.sum_all(ops.conv2d(x0, k, bias, stride=1, padding=0)), kernel),
        grad_check(lambda b: ops.sum_all(ops.conv2d(x0, kernel, b, stride=1, padding=1)), bias),
    ]
    return max(errs)


def check_dense(seed: int) -> float:
    r = _rng(seed)
    w = Tensor(r.normal(size=(6, 4)), dtype=np.float64)
    b = Tensor(r.normal(size=4), dtype=np.float64)
    x0 = Tensor(r.normal(size=(3, 6)), dtype=np.float64)
    return max(
        grad_check(lambda x: ops.sum_all(ops.dense(x, w, b)), x0),
        grad_check(lambda ww: ops.sum_all(ops.dense(x0, ww, b)), w),
        grad_check(lambda bb: ops.sum_all(ops.dense(x0, w, bb)), b),
    )


def check_relu(seed: int) -> float:
    # offset away from the kink so finite differences are valid
    x = _rng(seed).normal(size=(4, 4))
    x = np.where(np.abs(x) < 1e-2, 0.5, x)
    return grad_check(lambda t: ops.sum_all(ops.mul(ops.relu(t), ops.relu(t))), Tensor(x, dtype=np.float64))


def check_hardswish(seed: int) -> float:
    x = _rng(seed).normal(size=(4, 4)) * 2.0
    x = np.where(np.abs(np.abs(x) - 3.0) < 1e-2, 0.0, x)
    return grad_check(lambda t: ops.sum_all(ops.hardswish(t)), Tensor(x, dtype=np.float64))


def check_global_avg_pool(seed: int) -> float:
    x = _rng(seed).normal(size=(2, 3, 3, 2))
    return grad_check(
        lambda t: ops.sum_all(ops.mul(ops.global_avg_pool(t), ops.global_avg_pool(t))),
        Tensor(x, dtype=np.float64),
    )


def check_softmax_cross_entropy(seed: int) -> float:
    r = _rng(seed)
    labels = r.integers(0, 5, size=3)
    x = r.normal(size=(3, 5))
    return grad_check(lambda t: ops.softmax_cross_entropy(t, labels), Tensor(x, dtype=np.float64))


def check_softmax_rows(seed: int) -> float:
    r = _rng(seed)
    coeff = Tensor(r.normal(size=(3, 5)), dtype=np.float64)
    x = r.normal(size=(3, 5))
    return grad_check(lambda t: ops.sum_all(ops.mul(ops.softmax_rows(t), coeff)), Tensor(x, dtype=np.float64))


def check_blend(seed: int) -> float:
    r = _rng(seed)
    x0 = Tensor(r.uniform(size=(2, 4, 4, 3)), dtype=np.float64)
    a0 = Tensor(r.uniform(0.1, 1.0, size=3), dtype=np.float64)
    return max(
        grad_check(lambda a: ops.sum_all(ops.mul(ops.channel_blend(x0, a), ops.channel_blend(x0, a))), a0),
        grad_check(lambda x: ops.sum_all(ops.mul(ops.channel_blend(x, a0), ops.channel_blend(x, a0))), x0),
    )


def check_sample_blend(seed: int) -> float:
    r = _rng(seed)
    x0 = Tensor(r.uniform(size=(2, 4, 4, 3)), dtype=np.float64)
    w0 = Tensor(r.uniform(0.1, 1.0, size=(2, 3)), dtype=np.float64)
    return max(
        grad_check(lambda w: ops.sum_all(ops.mul(ops.sample_blend(x0, w), ops.sample_blend(x0, w))), w0),
        grad_check(lambda x: ops.sum_all(ops.mul(ops.sample_blend(x, w0), ops.sample_blend(x, w0))), x0),
    )


def check_alpha_composite_two(seed: int) -> float:
    r = _rng(seed)
    a2 = Tensor(r.uniform(size=(1, 3, 3, 1)), dtype=np.float64)
    a1 = Tensor(r.uniform(size=(1, 3, 3, 1)), dtype=np.float64)
    return grad_check(
        lambda t: ops.sum_all(ops.mul(mixing.alpha_composite_two(t, a2, 0.3),
                                      mixing.alpha_composite_two(t, a2, 0.3))),
        a1,
    )


def check_attention_blend(seed: int) -> float:
    head = AttentionHead(channel_count=3, embed_width=8, seed=seed, dtype=np.float64)
    x0 = Tensor(_rng(seed).uniform(size=(2, 8, 8, 3)), dtype=np.float64)
    # eps 1e-3: the loss magnitude (~40) through two conv stages makes the
    # 1e-5 step roundoff-dominated on coordinates with near-zero gradients
    errs = [grad_check(lambda x: ops.sum_all(attention_blend(x, head)), x0, eps=1e-3)]
    for name in head.params:
        errs.append(_param_grad_check(head, name, x0))
    return max(errs)


def _param_grad_check(head: AttentionHead, name: str, x0: Tensor) -> float:
    """Finite-difference check of one attention-head parameter."""
    p = head.params[name]

    def f(t: Tensor) -> Tensor:
        original = head.params[name]
        head.params[name] = t
        try:
            return ops.sum_all(attention_blend(x0, head))
        finally:
            head.params[name] = original

    return grad_check(f, Tensor(p.data.copy(), dtype=np.float64), eps=1e-3)


OP_CHECKS: dict[str, Callable[[int], float]] = {
    "conv2d": check_conv2d,
    "dense": check_dense,
    "relu": check_relu,
    "hardswish": check_hardswish,
    "global_avg_pool": check_global_avg_pool,
    "softmax_cross_entropy": check_softmax_cross_entropy,
    "softmax_rows": check_softmax_rows,
    "blend": check_blend,
    "sample_blend": check_sample_blend,
    "alpha_composite_two": check_alpha_composite_two,
    "attention_blend": check_attention_blend,
}


def run_all_checks(seed: int = 0, tolerance: float = 1e-4) -> list[tuple[str, float, bool]]:
    """(op, max relative error, passed) for every registered op."""
    rows = []
    for name, fn in OP_CHECKS.items():
        err = fn(seed)
        rows.append((name, err, err < tolerance))
    return rows
