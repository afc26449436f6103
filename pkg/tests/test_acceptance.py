"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

The digit-corpus and synthetic experiments are multi-seed training runs and
dominate the suite's runtime (tens of minutes total on a desktop CPU); they
are shared across criteria through session-scoped fixtures.
"""

import itertools
import json

import numpy as np
import pytest

from dcmix import data as dp
from dcmix.cli import build_dataset, main
from dcmix.config import RunConfig
from dcmix.mixing import MixingWeights, alpha_composite_two, blend
from dcmix.models import build_model
from dcmix.network import (
    NetworkConfig,
    StageConfig,
    blend_flops,
    count_parameters,
    default_mnist_config,
    estimate_flops,
)
from dcmix.opchecks import OP_CHECKS
from dcmix.stats import spearman_rho
from dcmix.tensor import Tensor
from dcmix.train import TrainConfig, _predict, evaluate, train

N_SEEDS = 5


# ---------------------------------------------------------------------------
# shared experiments


@pytest.fixture(scope="session")
def digit_splits():
    """10,000 digit samples + 2 uniform noise channels, split 70/30 + 80/20."""
    dataset, spec = build_dataset(RunConfig())
    return dp.split(dataset, spec)


def _run_experiment(kind, splits, seed, epochs):
    train_set, val_set, hold_set = splits
    channels = train_set.channel_count
    net_cfg = default_mnist_config(input_channels=channels if kind == "plain" else 1)
    model = build_model(kind, net_cfg, channels, seed=seed)
    config = TrainConfig(
        learning_rate=3e-3, epochs=epochs, batch_size=64, seed=seed,
        model=kind, patience=0,
    )
    train(train_set, val_set, model, config)
    metrics = evaluate(model, hold_set)
    if kind == "attention":
        model.reset_weight_stats()
        _predict(model, val_set)
    weights = model.channel_weights() if kind != "plain" else None
    ranking = model.ranking() if kind != "plain" else None
    return {"weights": weights, "ranking": ranking, "accuracy": metrics.accuracy}


@pytest.fixture(scope="session")
def dcmix_digit_runs(digit_splits):
    return [_run_experiment("dcmix", digit_splits, seed, epochs=6) for seed in range(N_SEEDS)]


@pytest.fixture(scope="session")
def attention_digit_runs(digit_splits):
    return [_run_experiment("attention", digit_splits, seed, epochs=4) for seed in range(N_SEEDS)]


@pytest.fixture(scope="session")
def synthetic_runs():
    """2 signal + 2 redundant + 2 noise channels, 5 seeds."""
    dataset = dp.synth_multispectral(
        3000, signal_channels=2, noise_channels=2, redundancy=0.5,
        seed=0, redundant_channels=2,
    )
    splits = dp.split(dataset, dp.SplitSpec(0.30, 0.20, seed=3))
    net_cfg = NetworkConfig(
        stages=(StageConfig(8, 3, 1), StageConfig(16, 3, 2), StageConfig(32, 3, 2)),
        class_count=4,
        input_size=16,
        input_channels=1,
    )
    runs = []
    for seed in range(N_SEEDS):
        model = build_model("dcmix", net_cfg, 6, seed=seed)
        config = TrainConfig(learning_rate=3e-3, epochs=8, batch_size=64,
                             seed=seed, patience=0)
        train(splits[0], splits[1], model, config)
        runs.append({"ranking": model.ranking(), "weights": model.channel_weights()})
    return runs


# ---------------------------------------------------------------------------
# 1-3: digit-corpus experiments


def test_criterion_1_noise_channel_ranking_recovery(dcmix_digit_runs):
    # the learned alpha for the informative channel is the strict maximum
    # in 5/5 seeded runs
    hits = sum(
        run["weights"][0] > max(run["weights"][1:]) for run in dcmix_digit_runs
    )
    assert hits == N_SEEDS, [run["weights"].tolist() for run in dcmix_digit_runs]


def test_criterion_2_classification_floor(dcmix_digit_runs):
    accuracies = [run["accuracy"] for run in dcmix_digit_runs]
    assert float(np.mean(accuracies)) >= 0.95, accuracies


def test_criterion_3_attention_agreement(dcmix_digit_runs, attention_digit_runs):
    top_hits = sum(run["ranking"][0] == 1 for run in attention_digit_runs)
    assert top_hits >= 4, [run["ranking"] for run in attention_digit_runs]
    dcmix_mean = np.mean([run["weights"] for run in dcmix_digit_runs], axis=0)
    attn_mean = np.mean([run["weights"] for run in attention_digit_runs], axis=0)
    assert spearman_rho(dcmix_mean, attn_mean) > 0.0


# ---------------------------------------------------------------------------
# 4-5: parameter and FLOP accounting


@pytest.mark.parametrize("channels", [1, 3, 6, 16])
def test_criterion_4_parameter_overhead_identity(channels):
    backbone = default_mnist_config(input_channels=1)
    wrapped = build_model("dcmix", backbone, channels, seed=0)
    plain = build_model("plain", default_mnist_config(input_channels=1), 1, seed=0)
    assert count_parameters(wrapped) - count_parameters(plain) == channels


@pytest.mark.parametrize("channels", [1, 3, 6, 16])
def test_criterion_5_flop_accounting(channels):
    backbone = default_mnist_config(input_channels=1)
    shape = (28, 28, channels)
    wrapped = build_model("dcmix", backbone, channels, seed=0)
    plain = build_model("plain", default_mnist_config(input_channels=1), 1, seed=0)
    diff = estimate_flops(wrapped, shape) - estimate_flops(plain, (28, 28, 1))
    assert diff == blend_flops(28, 28, channels) == (2 * channels - 1) * 28 * 28
    attention = build_model("attention", backbone, channels, seed=0)
    assert estimate_flops(attention, shape) > estimate_flops(wrapped, shape)


# ---------------------------------------------------------------------------
# 6: gradient correctness, >= 20 random instances per op


def test_criterion_6_gradient_checks_all_ops():
    assert {"blend", "attention_blend"} <= set(OP_CHECKS)
    worst = {}
    for name, check in OP_CHECKS.items():
        worst[name] = max(check(seed) for seed in range(20))
    failures = {k: v for k, v in worst.items() if not v < 1e-4}
    assert not failures, failures


# ---------------------------------------------------------------------------
# 7: Spearman closed-form oracle


def test_criterion_7_spearman_oracle():
    base = np.array([1.0, 2.0, 3.0, 4.0])
    for perm in itertools.permutations([1.0, 2.0, 3.0, 4.0]):
        ranks = np.asarray(perm)
        d2 = float(np.sum((base - ranks) ** 2))
        expected = 1.0 - 6.0 * d2 / (4 * (16 - 1))
        assert spearman_rho(base, ranks) == pytest.approx(expected, abs=1e-12)
    assert spearman_rho([0.3, 0.9, 0.1], [3.0, 9.0, 1.0]) == pytest.approx(1.0)
    assert spearman_rho([0.3, 0.9, 0.1], [-3.0, -9.0, -1.0]) == pytest.approx(-1.0)


# ---------------------------------------------------------------------------
# 8: blend equivalences


def test_criterion_8_two_image_compositing_equals_general_blend():
    rng = np.random.default_rng(0)
    a1 = Tensor(rng.uniform(size=(3, 8, 8, 1)), dtype=np.float64)
    a2 = Tensor(rng.uniform(size=(3, 8, 8, 1)), dtype=np.float64)
    for alpha in (0.0, 0.25, 0.7, 1.0):
        weights = MixingWeights(2, dtype=np.float64)
        weights.alphas.data = np.array([alpha, 1.0 - alpha])
        stacked = Tensor(np.concatenate([a1.data, a2.data], axis=3))
        via_general = blend(stacked, weights)
        via_two = alpha_composite_two(a1, a2, alpha)
        np.testing.assert_allclose(via_two.data, via_general.data, rtol=1e-15, atol=1e-15)


def test_criterion_8_blend_linearity():
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(2, 6, 6, 4))
    y = rng.uniform(size=(2, 6, 6, 4))
    weights = MixingWeights(4, dtype=np.float64)
    weights.alphas.data = rng.uniform(0.1, 1.0, size=4)
    for a, b in ((1.0, 1.0), (0.5, 2.0), (-1.5, 0.25)):
        combined = blend(Tensor(a * x + b * y, dtype=np.float64), weights).data
        separate = a * blend(Tensor(x, dtype=np.float64), weights).data + b * blend(
            Tensor(y, dtype=np.float64), weights
        ).data
        np.testing.assert_allclose(combined, separate, rtol=1e-6)


# ---------------------------------------------------------------------------
# 9: synthetic surrogate ranking


def test_criterion_9_noise_channels_ranked_last(synthetic_runs):
    hits = sum(set(run["ranking"][-2:]) == {5, 6} for run in synthetic_runs)
    assert hits >= 4, [run["ranking"] for run in synthetic_runs]


# ---------------------------------------------------------------------------
# 10: byte-level determinism of the CLI pipeline


DETERMINISM_CONFIG = """\
[data]
source = synthetic
samples = 240
signal_channels = 1
redundant_channels = 0
noise_channels = 1
redundancy = 0.0
class_count = 4
image_size = 16
seed = 0

[network]
stages = 6:3:2:hardswish

[train]
learning_rate = 0.003
epochs = 2
batch_size = 32
patience = 0

[model]
kind = dcmix
"""


def test_criterion_10_byte_identical_reruns(tmp_path):
    cfg_path = tmp_path / "run.ini"
    cfg_path.write_text(DETERMINISM_CONFIG)
    outputs = {}
    for tag in ("a", "b"):
        data_dir = tmp_path / tag / "data"
        run_dir = tmp_path / tag / "run"
        assert main(["--config", str(cfg_path), "--threads", "1",
                     "--out", str(data_dir), "prepare"]) == 0
        assert main(["--config", str(cfg_path), "--threads", "1",
                     "--out", str(run_dir), "train", "--data", str(data_dir)]) == 0
        outputs[tag] = {
            name: (data_dir / name).read_bytes()
            for name in ("train.dcmx", "validation.dcmx", "holdout.dcmx", "manifest.json")
        }
        outputs[tag].update(
            {name: (run_dir / name).read_bytes()
             for name in ("checkpoint.dcck", "report.json", "alphas.csv")}
        )
    assert set(outputs["a"]) == set(outputs["b"])
    for name in outputs["a"]:
        assert outputs["a"][name] == outputs["b"][name], f"{name} differs between runs"
    report = json.loads(outputs["a"]["report.json"].decode())
    assert report["config"]["train"]["seed"] == 0
