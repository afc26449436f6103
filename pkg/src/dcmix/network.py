"""Compact configurable CNN classifier plus parameter and FLOP accounting.

The default configuration (4 conv stages 8-16-32-64, 3x3 kernels, stride-2
downsampling after the first stage, hardswish, global average pooling, dense
head) stays under 0.3M parameters.

FLOP convention: one multiply-accumulate = 2 FLOPs; activations and pooling
cost 1 FLOP per element; counts are per single input sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .tensor import Tensor


class ConfigError(ValueError):
    """Invalid network configuration."""


@dataclass(frozen=True)
class StageConfig:
    out_channels: int
    kernel_size: int = 3
    stride: int = 1
    activation: str = "hardswish"


@dataclass(frozen=True)
class NetworkConfig:
    stages: tuple[StageConfig, ...]
    class_count: int = 10
    input_size: int = 28
    input_channels: int = 1
    head_hidden: int = 0  # 0 = single dense layer on pooled features
    head_activation: str = "hardswish"

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigError(f"class_count must be >= 2, got {self.class_count}")
        for i, s in enumerate(self.stages):
            if s.stride < 1:
                raise ConfigError(f"stage {i}: stride must be >= 1, got {s.stride}")

    def stage_spatial_sizes(self) -> list[int]:
        """Spatial size after each stage (square inputs, padding = k//2)."""
        sizes = []
        size = self.input_size
        for i, s in enumerate(self.stages):
            if size < s.kernel_size:
                raise ConfigError(
                    f"feature map collapses below the kernel at stage {i}: "
                    f"{size} < kernel_size {s.kernel_size}"
                )
            pad = s.kernel_size // 2
            size = (size + 2 * pad - s.kernel_size) // s.stride + 1
            sizes.append(size)
        return sizes


def default_mnist_config(input_channels: int = 1) -> NetworkConfig:
    return NetworkConfig(
        stages=(
            StageConfig(8, 3, 1),
            StageConfig(16, 3, 2),
            StageConfig(32, 3, 2),
            StageConfig(64, 3, 2),
        ),
        class_count=10,
        input_size=28,
        input_channels=input_channels,
    )


class Network:
    """The classifier: conv stages, global average pool, dense head.

    params is ordered; forward retains intermediate feature maps when
    asked (inspection only, not part of the autodiff contract).
    """

    def __init__(self, config: NetworkConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params
        self.feature_maps: dict[str, np.ndarray] = {}

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def forward(self, x: Tensor, retain_maps: bool = False) -> Tensor:
        cfg = self.config
        if x.data.ndim != 4 or x.shape[3] != cfg.input_channels or x.shape[1] != cfg.input_size:
            raise ValueError(
                f"forward: expected input [n,{cfg.input_size},{cfg.input_size},{cfg.input_channels}], got {x.shape}"
            )
        if retain_maps:
            self.feature_maps = {}
        h = x
        for i, s in enumerate(cfg.stages):
            h = ops.conv2d(h, self.params[f"stage{i}.kernel"], self.params[f"stage{i}.bias"],
                           stride=s.stride, padding=s.kernel_size // 2)
            h = ops.activation(h, s.activation)
            if retain_maps:
                self.feature_maps[f"stage{i}"] = h.data
        h = ops.global_avg_pool(h) if cfg.stages else ops.global_avg_pool(x)
        if cfg.head_hidden:
            h = ops.dense(h, self.params["head.hidden_weight"], self.params["head.hidden_bias"])
            h = ops.activation(h, cfg.head_activation)
        logits = ops.dense(h, self.params["head.weight"], self.params["head.bias"])
        return logits


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def build_network(config: NetworkConfig, seed: int, dtype=np.float32) -> Network:
    """Deterministic He-uniform initialization from the seed."""
    config.stage_spatial_sizes()  # validates spatial collapse
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    cin = config.input_channels
    for i, s in enumerate(config.stages):
        k = s.kernel_size
        fan_in = k * k * cin
        params[f"stage{i}.kernel"] = Tensor(
            _he_uniform(rng, (k, k, cin, s.out_channels), fan_in, dtype), requires_grad=True
        )
        params[f"stage{i}.bias"] = Tensor(np.zeros(s.out_channels, dtype=dtype), requires_grad=True)
        cin = s.out_channels
    feat = cin if config.stages else config.input_channels
    if config.head_hidden:
        params["head.hidden_weight"] = Tensor(
            _he_uniform(rng, (feat, config.head_hidden), feat, dtype), requires_grad=True
        )
        params["head.hidden_bias"] = Tensor(np.zeros(config.head_hidden, dtype=dtype), requires_grad=True)
        feat = config.head_hidden
    params["head.weight"] = Tensor(
        _he_uniform(rng, (feat, config.class_count), feat, dtype), requires_grad=True
    )
    params["head.bias"] = Tensor(np.zeros(config.class_count, dtype=dtype), requires_grad=True)
    return Network(config, params)


def count_parameters(model) -> int:
    """Total trainable scalars. Accepts a Network or any model exposing parameters()."""
    return int(sum(t.size for t in model.parameters()))


def network_flops(config: NetworkConfig) -> int:
    """Per-sample forward FLOPs of the plain classifier."""
    total = 0
    cin = config.input_channels
    sizes = config.stage_spatial_sizes()
    for s, size in zip(config.stages, sizes):
        total += 2 * s.kernel_size * s.kernel_size * cin * s.out_channels * size * size
        total += size * size * s.out_channels  # activation
        cin = s.out_channels
    last = sizes[-1] if config.stages else config.input_size
    total += last * last * cin  # global average pool
    feat = cin
    if config.head_hidden:
        total += 2 * feat * config.head_hidden + config.head_hidden
        feat = config.head_hidden
    total += 2 * feat * config.class_count
    return total


def blend_flops(height: int, width: int, channels: int) -> int:
    """The weighted channel sum costs (2c-1) FLOPs per pixel."""
    return (2 * channels - 1) * height * width


def estimate_flops(model, input_shape: tuple[int, int, int]) -> int:
    """Per-sample forward FLOPs for a Network or a wrapped model.

    input_shape is (height, width, channels) of the raw multi-channel input.
    """
    h, w, c = input_shape
    flops_fn = getattr(model, "extra_flops", None)
    base = network_flops(model.config if isinstance(model, Network) else model.network.config)
    if flops_fn is None:
        return base
    return base + int(flops_fn(h, w, c))
