"""Training loop (blend, forward, cross-entropy, backward, simultaneous
update of backbone and mixing parameters, nonnegativity projection),
classification metrics, and multi-seed aggregation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ops
from .data import LabeledDataset
from .models import AttentionModel, DcmixModel
from .tensor import Tape, Tensor, backward


class DivergedError(RuntimeError):
    """Training hit a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 15
    batch_size: int = 64
    optimizer: str = "adam"  # sgd | sgd_momentum | adam
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    model: str = "dcmix"  # dcmix | attention | plain
    patience: int = 3  # early stop on validation accuracy; 0 disables

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.optimizer not in ("sgd", "sgd_momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    model: object
    config: TrainConfig
    seed: int
    epochs_run: int
    train_loss_curve: list[float]
    val_accuracy_curve: list[float]
    alpha_trajectory: Optional[np.ndarray]  # [epochs, c] for the mixing model
    final_alphas: Optional[np.ndarray]
    wall_time_seconds: float


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: np.ndarray  # [classes, classes], rows = true label

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": self.confusion.tolist(),
        }


# ---------------------------------------------------------------------------
# optimizers

class Sgd:
    def __init__(self, params: list[Tensor], lr: float):
        self.params, self.lr = params, lr

    def step(self):
        for p in self.params:
            if p.grad is not None:
                p.data -= (self.lr * p.grad).astype(p.dtype)


class SgdMomentum:
    def __init__(self, params: list[Tensor], lr: float, momentum: float):
        self.params, self.lr, self.momentum = params, lr, momentum
        self.velocity = [np.zeros_like(p.data) for p in params]

    def step(self):
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            p.data -= (self.lr * v).astype(p.dtype)


class Adam:
    def __init__(self, params: list[Tensor], lr: float, beta1: float, beta2: float, eps: float):
        self.params, self.lr = params, lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p.data -= update.astype(p.dtype)


def make_optimizer(config: TrainConfig, params: list[Tensor]):
    if config.optimizer == "sgd":
        return Sgd(params, config.learning_rate)
    if config.optimizer == "sgd_momentum":
        return SgdMomentum(params, config.learning_rate, config.momentum)
    return Adam(params, config.learning_rate, config.beta1, config.beta2, config.adam_eps)


# ---------------------------------------------------------------------------
# training / evaluation

def _predict(model, dataset: LabeledDataset, batch_size: int = 256) -> np.ndarray:
    preds = np.empty(len(dataset), dtype=np.int64)
    for start in range(0, len(dataset), batch_size):
        batch = Tensor(dataset.images[start : start + batch_size])
        logits = model.forward(batch)
        preds[start : start + batch_size] = logits.data.argmax(axis=1)
    return preds


def train(
    train_set: LabeledDataset,
    val_set: LabeledDataset,
    model,
    config: TrainConfig,
) -> TrainResult:
    """Minibatch gradient descent over backbone and mixing/attention
    parameters, with nonnegativity projection applied by the model hook
    after every step. Deterministic for a fixed seed (single-threaded).
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    start_time = time.perf_counter()
    params = model.parameters()
    optimizer = make_optimizer(config, params)
    is_mixing = isinstance(model, DcmixModel)
    loss_curve: list[float] = []
    val_curve: list[float] = []
    alpha_rows: list[np.ndarray] = []
    best_val, best_epoch = -1.0, -1
    epochs_run = 0

    for epoch in range(config.epochs):
        rng = np.random.default_rng((config.seed, epoch))
        order = rng.permutation(len(train_set))
        epoch_loss, batches = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = Tensor(train_set.images[idx])
            yb = train_set.labels[idx]
            with Tape() as tape:
                logits = model.forward(xb)
                loss = ops.softmax_cross_entropy(logits, yb)
            if not np.isfinite(loss.data):
                raise DivergedError(f"non-finite loss at epoch {epoch}, batch {batches}")
            for p in params:
                p.zero_grad()
            backward(tape, loss)
            optimizer.step()
            model.post_step()
            epoch_loss += loss.item()
            batches += 1
        epochs_run = epoch + 1
        loss_curve.append(epoch_loss / batches)
        if isinstance(model, AttentionModel):
            model.reset_weight_stats()
        val_acc = float((_predict(model, val_set) == val_set.labels).mean()) if len(val_set) else 0.0
        val_curve.append(val_acc)
        if is_mixing:
            alpha_rows.append(model.mixing.values())
        if val_acc > best_val:
            best_val, best_epoch = val_acc, epoch
        if config.patience and epoch - best_epoch >= config.patience:
            break

    return TrainResult(
        model=model,
        config=config,
        seed=config.seed,
        epochs_run=epochs_run,
        train_loss_curve=loss_curve,
        val_accuracy_curve=val_curve,
        alpha_trajectory=np.stack(alpha_rows) if alpha_rows else None,
        final_alphas=model.mixing.values() if is_mixing else None,
        wall_time_seconds=time.perf_counter() - start_time,
    )


def confusion_matrix(labels: np.ndarray, preds: np.ndarray, class_count: int) -> np.ndarray:
    mat = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(mat, (labels, preds), 1)
    return mat


def metrics_from_confusion(confusion: np.ndarray) -> MetricsReport:
    """Macro-averaged metrics; classes absent from the true labels are
    excluded from the macro average."""
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    present = np.flatnonzero(confusion.sum(axis=1) > 0)
    precisions, recalls, f1s = [], [], []
    for k in present:
        tp = confusion[k, k]
        fp = confusion[:, k].sum() - tp
        fn = confusion[k, :].sum() - tp
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return MetricsReport(
        accuracy=accuracy,
        precision=float(np.mean(precisions)),
        recall=float(np.mean(recalls)),
        f1=float(np.mean(f1s)),
        confusion=confusion,
    )


def evaluate(model, dataset: LabeledDataset) -> MetricsReport:
    """Holdout metrics; a pure function of the frozen model and dataset."""
    if len(dataset) == 0:
        raise ValueError("empty evaluation set")
    class_count = model.network.config.class_count
    if isinstance(model, AttentionModel):
        model.reset_weight_stats()
    preds = _predict(model, dataset)
    return metrics_from_confusion(confusion_matrix(dataset.labels, preds, class_count))


# ---------------------------------------------------------------------------
# multi-seed aggregation

@dataclass
class AggregateReport:
    per_seed_metrics: list[MetricsReport]
    per_seed_rankings: list[Optional[list[int]]]
    per_seed_weights: list[Optional[np.ndarray]]
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)
    ranking_recovery_rate: Optional[float] = None


def multi_seed_run(
    run_one,
    base_seed: int,
    n_seeds: int,
    ground_truth_top: Optional[int] = None,
) -> AggregateReport:
    """Run the experiment once per seed and aggregate.

    run_one(seed) must return (metrics: MetricsReport, ranking, weights);
    ranking/weights may be None for the plain model. The recovery rate is
    the fraction of seeds whose top-ranked channel equals ground_truth_top
    (1-based).
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    metrics, rankings, weights = [], [], []
    for s in range(base_seed, base_seed + n_seeds):
        m, r, w = run_one(s)
        metrics.append(m)
        rankings.append(r)
        weights.append(w)
    report = AggregateReport(metrics, rankings, weights)
    for name in ("accuracy", "precision", "recall", "f1"):
        values = np.array([getattr(m, name) for m in metrics])
        report.mean[name] = float(values.mean())
        report.std[name] = float(values.std())
    if ground_truth_top is not None:
        hits = [r is not None and r[0] == ground_truth_top for r in rankings]
        report.ranking_recovery_rate = float(np.mean(hits))
    return report
