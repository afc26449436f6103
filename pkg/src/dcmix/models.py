"""Model wrappers: plain classifier, mixing-layer classifier, attention classifier.

All three expose forward(images) -> logits, parameters(), named_tensors()
for checkpointing, and extra_flops(h, w, c) for the per-sample cost on top
of the shared backbone.
"""

from __future__ import annotations

import numpy as np

from . import attention as attn
from . import mixing
from .network import Network, NetworkConfig, blend_flops, build_network
from .tensor import Tensor


class PlainModel:
    """The backbone applied directly to the multi-channel input."""

    kind = "plain"

    def __init__(self, network: Network):
        self.network = network

    @classmethod
    def build(cls, config: NetworkConfig, channel_count: int, seed: int, dtype=np.float32):
        if config.input_channels != channel_count:
            raise ValueError(
                f"plain model needs input_channels == dataset channels "
                f"({config.input_channels} != {channel_count})"
            )
        return cls(build_network(config, seed, dtype))

    def forward(self, images: Tensor) -> Tensor:
        return self.network.forward(images)

    def parameters(self) -> list[Tensor]:
        return self.network.parameters()

    def named_tensors(self) -> dict[str, Tensor]:
        return {f"network.{k}": v for k, v in self.network.params.items()}

    def post_step(self) -> None:
        pass

    extra_flops = None


class DcmixModel:
    """Mixing layer in front of a single-channel backbone."""

    kind = "dcmix"

    def __init__(self, mixing_weights: mixing.MixingWeights, network: Network):
        self.mixing = mixing_weights
        self.network = network

    @classmethod
    def build(cls, config: NetworkConfig, channel_count: int, seed: int, dtype=np.float32):
        if config.input_channels != 1:
            raise ValueError("the mixing layer emits one plane; backbone input_channels must be 1")
        return cls(mixing.MixingWeights(channel_count, dtype=dtype), build_network(config, seed, dtype))

    def forward(self, images: Tensor) -> Tensor:
        return self.network.forward(mixing.blend(images, self.mixing))

    def parameters(self) -> list[Tensor]:
        return [self.mixing.alphas] + self.network.parameters()

    def named_tensors(self) -> dict[str, Tensor]:
        out = {"mixing.alphas": self.mixing.alphas}
        out.update({f"network.{k}": v for k, v in self.network.params.items()})
        return out

    def post_step(self) -> None:
        mixing.project_nonnegative(self.mixing)

    def extra_flops(self, h: int, w: int, c: int) -> int:
        return blend_flops(h, w, c)

    def channel_weights(self) -> np.ndarray:
        return self.mixing.values()

    def ranking(self) -> list[int]:
        return mixing.importance_ranking(self.mixing)


class AttentionModel:
    """Per-sample attention channel weighting in front of a single-channel backbone."""

    kind = "attention"

    def __init__(self, head: attn.AttentionHead, network: Network):
        self.head = head
        self.network = network
        self._weight_sum = np.zeros(head.channel_count, dtype=np.float64)
        self._weight_count = 0

    @classmethod
    def build(cls, config: NetworkConfig, channel_count: int, seed: int, dtype=np.float32):
        if config.input_channels != 1:
            raise ValueError("attention blending emits one plane; backbone input_channels must be 1")
        return cls(attn.AttentionHead(channel_count, seed=seed + 1, dtype=dtype),
                   build_network(config, seed, dtype))

    def forward(self, images: Tensor) -> Tensor:
        weights = attn.attention_weights(images, self.head)
        self._weight_sum += weights.data.sum(axis=0)
        self._weight_count += weights.shape[0]
        from . import ops
        return self.network.forward(ops.sample_blend(images, weights))

    def parameters(self) -> list[Tensor]:
        return self.head.parameters() + self.network.parameters()

    def named_tensors(self) -> dict[str, Tensor]:
        out = {f"head.{k}": v for k, v in self.head.params.items()}
        out.update({f"network.{k}": v for k, v in self.network.params.items()})
        return out

    def post_step(self) -> None:
        pass

    def extra_flops(self, h: int, w: int, c: int) -> int:
        return self.head.flops(h, w, c)

    def reset_weight_stats(self) -> None:
        self._weight_sum[:] = 0.0
        self._weight_count = 0

    def mean_weights(self) -> np.ndarray:
        """Dataset-mean channel weights accumulated since the last reset."""
        if self._weight_count == 0:
            raise ValueError("no forward passes recorded since the last reset")
        return (self._weight_sum / self._weight_count).astype(np.float64)

    def channel_weights(self) -> np.ndarray:
        return self.mean_weights()

    def ranking(self) -> list[int]:
        means = self.mean_weights()
        order = sorted(range(len(means)), key=lambda i: (-means[i], i))
        return [i + 1 for i in order]


MODEL_KINDS = {"plain": PlainModel, "dcmix": DcmixModel, "attention": AttentionModel}


def build_model(kind: str, config: NetworkConfig, channel_count: int, seed: int, dtype=np.float32):
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}")
    return cls.build(config, channel_count, seed, dtype)
