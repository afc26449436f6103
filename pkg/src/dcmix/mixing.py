"""The mixing layer: nonnegative learnable per-channel weights, the weighted
channel sum that collapses a c-channel image to one plane, and importance
extraction from the learned weights.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import DimensionError, Tensor


class MixingWeights:
    """Learnable alpha vector, one nonnegative scalar per input channel.

    Initialized to 1/c so no channel is favored before training. The
    nonnegativity constraint is enforced by projection (clamp at zero)
    after each optimizer step, keeping the raw weights directly readable
    as importance scores.
    """

    def __init__(self, channel_count: int, dtype=np.float32):
        if channel_count < 1:
            raise ValueError(f"channel_count must be >= 1, got {channel_count}")
        self.channel_count = channel_count
        self.alphas = Tensor(
            np.full(channel_count, 1.0 / channel_count, dtype=dtype), requires_grad=True
        )

    def values(self) -> np.ndarray:
        return self.alphas.data.copy()


def blend(image: Tensor, weights: MixingWeights) -> Tensor:
    """Collapse [n,h,w,c] to [n,h,w,1] as sum_i alphas[i] * channel_i."""
    if image.shape[-1] != weights.channel_count:
        raise DimensionError(
            f"blend: image has {image.shape[-1]} channels (axis 3), "
            f"weights expect {weights.channel_count}"
        )
    return ops.channel_blend(image, weights.alphas)


def alpha_composite_two(a1: Tensor, a2: Tensor, alpha1: float) -> Tensor:
    """Two-image alpha compositing: alpha1*a1 + (1-alpha1)*a2."""
    if a1.shape != a2.shape:
        raise DimensionError(f"alpha_composite_two: shapes {a1.shape} and {a2.shape} differ")
    if not 0.0 <= alpha1 <= 1.0:
        raise ValueError(f"alpha1 must be in [0,1], got {alpha1}")
    return ops.add(ops.scale(a1, alpha1), ops.scale(a2, 1.0 - alpha1))


def project_nonnegative(weights: MixingWeights) -> None:
    """Clamp the alphas at zero in place; called after every optimizer step."""
    np.maximum(weights.alphas.data, 0.0, out=weights.alphas.data)


def importance_ranking(weights: MixingWeights | np.ndarray) -> list[int]:
    """1-based channel indices sorted by weight descending, ties to lower index."""
    values = weights.values() if isinstance(weights, MixingWeights) else np.asarray(weights)
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    return [i + 1 for i in order]
