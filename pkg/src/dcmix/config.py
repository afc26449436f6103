"""Run-configuration files: plain key = value text with [data], [network],
[train], and [model] sections. Unknown sections or keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .network import NetworkConfig, StageConfig
from .train import TrainConfig


class RunConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "data": {
        "source", "images_path", "labels_path", "pool_size", "samples",
        "noise_channels", "seed", "holdout_fraction", "validation_fraction",
        "signal_channels", "redundant_channels", "redundancy", "class_count",
        "image_size",
    },
    "network": {"stages", "head_hidden", "head_activation"},
    "train": {
        "learning_rate", "epochs", "batch_size", "optimizer", "momentum",
        "beta1", "beta2", "seed", "patience", "precision",
    },
    "model": {"kind"},
}

_SOURCES = ("rendered", "mnist_idx", "synthetic")


@dataclass
class DataConfig:
    source: str = "rendered"
    images_path: str = ""
    labels_path: str = ""
    pool_size: int = 12000
    samples: int = 10000
    noise_channels: int = 2
    seed: int = 0
    holdout_fraction: float = 0.30
    validation_fraction: float = 0.20
    # synthetic-only knobs
    signal_channels: int = 2
    redundant_channels: int = 2
    redundancy: float = 0.5
    class_count: int = 4
    image_size: int = 16


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    stages: str = "8:3:1:hardswish,16:3:2:hardswish,32:3:2:hardswish,64:3:2:hardswish"
    head_hidden: int = 0
    head_activation: str = "hardswish"
    train: TrainConfig = field(default_factory=TrainConfig)
    model_kind: str = "dcmix"
    precision: str = "f32"

    def network_config(self, class_count: int, input_size: int, input_channels: int) -> NetworkConfig:
        return NetworkConfig(
            stages=parse_stages(self.stages),
            class_count=class_count,
            input_size=input_size,
            input_channels=input_channels,
            head_hidden=self.head_hidden,
            head_activation=self.head_activation,
        )

    def as_dict(self) -> dict:
        """Full resolved config, echoed into every report for provenance."""
        return {
            "data": vars(self.data).copy(),
            "network": {
                "stages": self.stages,
                "head_hidden": self.head_hidden,
                "head_activation": self.head_activation,
            },
            "train": {
                "learning_rate": self.train.learning_rate,
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "optimizer": self.train.optimizer,
                "momentum": self.train.momentum,
                "beta1": self.train.beta1,
                "beta2": self.train.beta2,
                "seed": self.train.seed,
                "patience": self.train.patience,
                "precision": self.precision,
            },
            "model": {"kind": self.model_kind},
        }


def parse_stages(text: str) -> tuple[StageConfig, ...]:
    """Parse 'out:kernel:stride[:activation],...' into stage configs."""
    stages = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) not in (3, 4):
            raise RunConfigError(f"bad stage spec {part!r}; expected out:kernel:stride[:activation]")
        out_c, k, s = (int(b) for b in bits[:3])
        act = bits[3] if len(bits) == 4 else "hardswish"
        stages.append(StageConfig(out_c, k, s, act))
    if not stages:
        raise RunConfigError("at least one network stage is required")
    return tuple(stages)


def stages_to_string(stages: tuple[StageConfig, ...]) -> str:
    return ",".join(f"{s.out_channels}:{s.kernel_size}:{s.stride}:{s.activation}" for s in stages)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise RunConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise RunConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise RunConfigError(f"{path}: unknown key {key!r} in [{section}]")
    cfg = RunConfig()

    if parser.has_section("data"):
        d = parser["data"]
        cfg.data = DataConfig(
            source=d.get("source", cfg.data.source),
            images_path=d.get("images_path", ""),
            labels_path=d.get("labels_path", ""),
            pool_size=d.getint("pool_size", cfg.data.pool_size),
            samples=d.getint("samples", cfg.data.samples),
            noise_channels=d.getint("noise_channels", cfg.data.noise_channels),
            seed=d.getint("seed", cfg.data.seed),
            holdout_fraction=d.getfloat("holdout_fraction", cfg.data.holdout_fraction),
            validation_fraction=d.getfloat("validation_fraction", cfg.data.validation_fraction),
            signal_channels=d.getint("signal_channels", cfg.data.signal_channels),
            redundant_channels=d.getint("redundant_channels", cfg.data.redundant_channels),
            redundancy=d.getfloat("redundancy", cfg.data.redundancy),
            class_count=d.getint("class_count", cfg.data.class_count),
            image_size=d.getint("image_size", cfg.data.image_size),
        )
        if cfg.data.source not in _SOURCES:
            raise RunConfigError(f"{path}: unknown data source {cfg.data.source!r}; expected {_SOURCES}")

    if parser.has_section("network"):
        n = parser["network"]
        cfg.stages = n.get("stages", cfg.stages)
        parse_stages(cfg.stages)  # validate early
        cfg.head_hidden = n.getint("head_hidden", cfg.head_hidden)
        cfg.head_activation = n.get("head_activation", cfg.head_activation)

    if parser.has_section("model"):
        cfg.model_kind = parser["model"].get("kind", cfg.model_kind)
        if cfg.model_kind not in ("dcmix", "attention", "plain"):
            raise RunConfigError(f"{path}: unknown model kind {cfg.model_kind!r}")

    if parser.has_section("train"):
        t = parser["train"]
        cfg.precision = t.get("precision", cfg.precision)
        if cfg.precision not in ("f32", "f64"):
            raise RunConfigError(f"{path}: precision must be f32 or f64, got {cfg.precision!r}")
        cfg.train = TrainConfig(
            learning_rate=t.getfloat("learning_rate", cfg.train.learning_rate),
            epochs=t.getint("epochs", cfg.train.epochs),
            batch_size=t.getint("batch_size", cfg.train.batch_size),
            optimizer=t.get("optimizer", cfg.train.optimizer),
            momentum=t.getfloat("momentum", cfg.train.momentum),
            beta1=t.getfloat("beta1", cfg.train.beta1),
            beta2=t.getfloat("beta2", cfg.train.beta2),
            seed=t.getint("seed", cfg.train.seed),
            patience=t.getint("patience", cfg.train.patience),
            model=cfg.model_kind,
        )
    else:
        cfg.train = TrainConfig(model=cfg.model_kind)
    return cfg
