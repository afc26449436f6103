"""Learnable channel-mixing for multi-channel image classification.

A self-contained stack: tape-based autodiff on numpy, a compact CNN
classifier, the nonnegative channel-mixing layer with importance
extraction, an attention-based channel-selection baseline, dataset
construction with noise-channel injection, and the training/evaluation
pipeline with ranking and correlation reports.
"""

from .data import LabeledDataset, SplitSpec
from .gradcheck import grad_check
from .mixing import MixingWeights, alpha_composite_two, blend, importance_ranking, project_nonnegative
from .network import (
    Network,
    NetworkConfig,
    StageConfig,
    build_network,
    count_parameters,
    default_mnist_config,
    estimate_flops,
)
from .stats import importance_correlation_matrix, spearman_rho
from .tensor import DimensionError, NonFiniteError, Tape, Tensor, backward
from .train import MetricsReport, TrainConfig, TrainResult, evaluate, multi_seed_run, train

__all__ = [
    "LabeledDataset",
    "SplitSpec",
    "grad_check",
    "MixingWeights",
    "alpha_composite_two",
    "blend",
    "importance_ranking",
    "project_nonnegative",
    "Network",
    "NetworkConfig",
    "StageConfig",
    "build_network",
    "count_parameters",
    "default_mnist_config",
    "estimate_flops",
    "importance_correlation_matrix",
    "spearman_rho",
    "DimensionError",
    "NonFiniteError",
    "Tape",
    "Tensor",
    "backward",
    "MetricsReport",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "multi_seed_run",
    "train",
]

__version__ = "0.1.0"
