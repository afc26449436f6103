"""Attention-based channel selection baseline.

Each channel is encoded by a shared small conv stack (conv-hardswish twice,
global average pool, dense embedding); a learned query vector scores the
embeddings by dot product and the softmax of the scores gives per-sample
channel weights. Strictly heavier than the mixing layer by construction.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .network import _he_uniform
from .tensor import DimensionError, Tensor


class AttentionHead:
    """Shared per-channel encoder plus a learned scoring query."""

    ENC1_CHANNELS = 8
    ENC2_CHANNELS = 16

    def __init__(self, channel_count: int, embed_width: int = 32, seed: int = 0, dtype=np.float32):
        if channel_count < 1:
            raise ValueError(f"channel_count must be >= 1, got {channel_count}")
        self.channel_count = channel_count
        self.embed_width = embed_width
        rng = np.random.default_rng(seed)
        c1, c2 = self.ENC1_CHANNELS, self.ENC2_CHANNELS
        self.params: dict[str, Tensor] = {
            "enc1.kernel": Tensor(_he_uniform(rng, (3, 3, 1, c1), 9, dtype), requires_grad=True),
            "enc1.bias": Tensor(np.zeros(c1, dtype=dtype), requires_grad=True),
            "enc2.kernel": Tensor(_he_uniform(rng, (3, 3, c1, c2), 9 * c1, dtype), requires_grad=True),
            "enc2.bias": Tensor(np.zeros(c2, dtype=dtype), requires_grad=True),
            "embed.weight": Tensor(_he_uniform(rng, (c2, embed_width), c2, dtype), requires_grad=True),
            "query": Tensor(_he_uniform(rng, (embed_width, 1), embed_width, dtype), requires_grad=True),
        }
        # The encoder is shared across channels, so any channel-independent
        # score shift cancels in the softmax; bias terms on the embedding and
        # the query dot product would be dead parameters. They stay fixed at 0.
        self._embed_bias = Tensor(np.zeros(embed_width, dtype=dtype))
        self._query_bias = Tensor(np.zeros(1, dtype=dtype))

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def _encode(self, plane: Tensor) -> Tensor:
        p = self.params
        h = ops.conv2d(plane, p["enc1.kernel"], p["enc1.bias"], stride=2, padding=1)
        h = ops.hardswish(h)
        h = ops.conv2d(h, p["enc2.kernel"], p["enc2.bias"], stride=2, padding=1)
        h = ops.hardswish(h)
        h = ops.global_avg_pool(h)
        return ops.dense(h, p["embed.weight"], self._embed_bias)

    def flops(self, height: int, width: int, channels: int) -> int:
        """Per-sample cost of scoring + softmax + per-sample blend."""
        c1, c2 = self.ENC1_CHANNELS, self.ENC2_CHANNELS
        h1, w1 = (height + 1) // 2, (width + 1) // 2
        h2, w2 = (h1 + 1) // 2, (w1 + 1) // 2
        per_channel = (
            2 * 9 * 1 * c1 * h1 * w1 + h1 * w1 * c1
            + 2 * 9 * c1 * c2 * h2 * w2 + h2 * w2 * c2
            + h2 * w2 * c2  # pool
            + 2 * c2 * self.embed_width
            + 2 * self.embed_width * 1  # query dot product
        )
        softmax = channels  # 1 per element
        blend = (2 * channels - 1) * height * width
        return channels * per_channel + softmax + blend


def attention_weights(image: Tensor, head: AttentionHead) -> Tensor:
    """Per-sample softmax channel weights [n,c]."""
    if image.data.ndim != 4 or image.shape[3] != head.channel_count:
        raise DimensionError(
            f"attention_weights: image channels (axis 3 = {image.shape[-1] if image.data.ndim == 4 else '?'}) "
            f"!= head channel count {head.channel_count}"
        )
    scores = []
    for i in range(head.channel_count):
        embed = head._encode(ops.channel_slice(image, i))
        scores.append(ops.dense(embed, head.params["query"], head._query_bias))
    return ops.softmax_rows(ops.concat_cols(scores))


def attention_blend(image: Tensor, head: AttentionHead) -> Tensor:
    """Collapse the image with its own attention weights -> [n,h,w,1]."""
    return ops.sample_blend(image, attention_weights(image, head))


def attention_importance(weights_over_dataset: np.ndarray) -> list[int]:
    """Rank channels by mean weight over the evaluation set (1-based, descending)."""
    w = np.asarray(weights_over_dataset)
    if w.ndim != 2 or w.shape[0] == 0:
        raise ValueError(f"expected a nonempty [N,c] weight matrix, got shape {w.shape}")
    means = w.mean(axis=0)
    order = sorted(range(len(means)), key=lambda i: (-means[i], i))
    return [i + 1 for i in order]
