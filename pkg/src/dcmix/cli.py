"""Command-line surface: prepare, train, evaluate, compare, gradcheck.

Primary outputs (dataset containers, checkpoints, JSON reports, CSV tables)
are deterministic given config and seed; timestamps and wall-clock timings
go to a run.log sidecar only.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import data as dp
from . import digits
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_run_config
from .models import AttentionModel, DcmixModel, build_model
from .network import count_parameters, estimate_flops
from .stats import importance_correlation_matrix
from .train import _predict, evaluate, train

DATA_DIR_ENV = "DCMIX_DATA_DIR"

SPLIT_FILES = {"train": "train.dcmx", "validation": "validation.dcmx", "holdout": "holdout.dcmx"}


class CliError(RuntimeError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _log(out_dir: Path, message: str) -> None:
    with open(out_dir / "run.log", "a") as f:
        f.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")


# ---------------------------------------------------------------------------
# prepare

def build_dataset(cfg: RunConfig) -> tuple[dp.LabeledDataset, dp.SplitSpec]:
    """Construct the normalized full dataset per the [data] section.

    Seed derivation: base seed S drives rendering (S), subsampling (S+1),
    noise injection (S+2); the split uses S+3.
    """
    d = cfg.data
    if d.source == "synthetic":
        dataset = dp.synth_multispectral(
            n=d.samples,
            signal_channels=d.signal_channels,
            noise_channels=d.noise_channels,
            redundancy=d.redundancy,
            seed=d.seed,
            redundant_channels=d.redundant_channels,
            class_count=d.class_count,
            size=d.image_size,
        )
        return dataset, dp.SplitSpec(d.holdout_fraction, d.validation_fraction, d.seed + 3)

    if d.source == "mnist_idx":
        data_dir = os.environ.get(DATA_DIR_ENV, "")
        images_path = d.images_path or (Path(data_dir) / "train-images-idx3-ubyte" if data_dir else "")
        labels_path = d.labels_path or (Path(data_dir) / "train-labels-idx1-ubyte" if data_dir else "")
        if not images_path or not Path(images_path).exists():
            raise CliError(
                f"images file not found: {images_path or '(unset)'} "
                f"(set [data] images_path or ${DATA_DIR_ENV})"
            )
        if not labels_path or not Path(labels_path).exists():
            raise CliError(
                f"labels file not found: {labels_path or '(unset)'} "
                f"(set [data] labels_path or ${DATA_DIR_ENV})"
            )
        dataset = dp.load_mnist_idx(images_path, labels_path)
    else:  # rendered digit corpus
        images, labels = digits.generate_digit_images(d.pool_size, d.seed)
        dataset = dp.LabeledDataset(images=images[..., None], labels=labels)

    dataset = dp.subsample(dataset, d.samples, d.seed + 1)
    if d.noise_channels:
        dataset = dp.add_noise_channels(dataset, d.noise_channels, d.seed + 2)
    dataset = dp.normalize_01(dataset)
    return dataset, dp.SplitSpec(d.holdout_fraction, d.validation_fraction, d.seed + 3)


def cmd_prepare(cfg: RunConfig, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, spec = build_dataset(cfg)
    train_set, val_set, hold_set = dp.split(dataset, spec)
    files = {}
    for name, subset in (("train", train_set), ("validation", val_set), ("holdout", hold_set)):
        path = out_dir / SPLIT_FILES[name]
        dp.save_container(subset, path)
        files[SPLIT_FILES[name]] = _sha256(path)
    manifest = {
        "config": cfg.as_dict(),
        "channels": dataset.channel_count,
        "image_size": dataset.images.shape[1],
        "class_count": int(dataset.labels.max()) + 1,
        "counts": {"train": len(train_set), "validation": len(val_set), "holdout": len(hold_set)},
        "ground_truth_ranking": list(dataset.ground_truth_importance)
        if dataset.ground_truth_importance
        else None,
        "checksums": files,
    }
    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text())
        if previous.get("checksums") != files:
            raise CliError(
                f"{manifest_path}: checksum mismatch against existing manifest for the same config/seed"
            )
    _write_json(manifest_path, manifest)
    _log(out_dir, f"prepare: wrote {len(files)} containers")
    return manifest


# ---------------------------------------------------------------------------
# train

def _precision_dtype(cfg: RunConfig):
    return np.float64 if cfg.precision == "f64" else np.float32


def _cast_dataset(dataset: dp.LabeledDataset, dtype) -> dp.LabeledDataset:
    if dataset.images.dtype == dtype:
        return dataset
    from dataclasses import replace

    return replace(dataset, images=dataset.images.astype(dtype))


def _model_weights_and_ranking(model, val_set: dp.LabeledDataset):
    """Channel weights + 1-based ranking; attention weights are the mean
    over the validation set."""
    if isinstance(model, DcmixModel):
        return model.channel_weights(), model.ranking()
    if isinstance(model, AttentionModel):
        model.reset_weight_stats()
        _predict(model, val_set)
        return model.channel_weights(), model.ranking()
    return None, None


def cmd_train(cfg: RunConfig, data_dir: Path, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    splits = {}
    for name, fname in SPLIT_FILES.items():
        splits[name] = dp.load_container(data_dir / fname)
    channels = manifest["channels"]
    class_count = manifest["class_count"]
    input_size = manifest["image_size"]
    dtype = _precision_dtype(cfg)

    input_channels = channels if cfg.model_kind == "plain" else 1
    net_cfg = cfg.network_config(class_count, input_size, input_channels)
    model = build_model(cfg.model_kind, net_cfg, channels, cfg.train.seed, dtype)

    start = time.perf_counter()
    result = train(
        _cast_dataset(splits["train"], dtype),
        _cast_dataset(splits["validation"], dtype),
        model,
        cfg.train,
    )
    metrics = evaluate(model, _cast_dataset(splits["holdout"], dtype))
    weights, ranking = _model_weights_and_ranking(model, _cast_dataset(splits["validation"], dtype))

    ckpt_config = {
        "run_config": cfg.as_dict(),
        "model": cfg.model_kind,
        "channels": channels,
        "class_count": class_count,
        "input_size": input_size,
        "seed": cfg.train.seed,
        "precision": cfg.precision,
    }
    tensors = {k: v.data for k, v in model.named_tensors().items()}
    if result.alpha_trajectory is not None:
        tensors["trajectory.alphas"] = result.alpha_trajectory
    ckpt_path = out_dir / "checkpoint.dcck"
    save_checkpoint(ckpt_path, tensors, ckpt_config)

    gt = manifest.get("ground_truth_ranking")
    report = {
        "method": cfg.model_kind,
    }
    if weights is not None:
        report["channel_weights"] = [float(v) for v in weights]
        report["ranking"] = ranking
    report.update(
        {
            "ground_truth_ranking": gt,
            "recovery": (ranking is not None and gt is not None and ranking[0] == gt[0]),
            "spearman_vs": None,
            "parameter_count": count_parameters(model),
            "flop_estimate": estimate_flops(model, (input_size, input_size, channels)),
            "seed": cfg.train.seed,
            "epochs_run": result.epochs_run,
            "metrics": metrics.as_dict(),
            "train_loss_curve": result.train_loss_curve,
            "val_accuracy_curve": result.val_accuracy_curve,
            "config": cfg.as_dict(),
        }
    )
    _write_json(out_dir / "report.json", report)
    if result.alpha_trajectory is not None:
        with open(out_dir / "alphas.csv", "w") as f:
            f.write("epoch," + ",".join(f"alpha_{i+1}" for i in range(channels)) + "\n")
            for e, row in enumerate(result.alpha_trajectory):
                f.write(f"{e}," + ",".join(repr(float(v)) for v in row) + "\n")
    _log(out_dir, f"train: {result.epochs_run} epochs in {time.perf_counter() - start:.1f}s")
    return report


# ---------------------------------------------------------------------------
# evaluate

def model_from_checkpoint(path):
    tensors, ckpt_cfg = load_checkpoint(path)
    run_cfg_dict = ckpt_cfg["run_config"]
    cfg = RunConfig()
    cfg.stages = run_cfg_dict["network"]["stages"]
    cfg.head_hidden = run_cfg_dict["network"]["head_hidden"]
    cfg.head_activation = run_cfg_dict["network"]["head_activation"]
    cfg.model_kind = ckpt_cfg["model"]
    cfg.precision = ckpt_cfg.get("precision", "f32")
    channels = ckpt_cfg["channels"]
    input_channels = channels if cfg.model_kind == "plain" else 1
    net_cfg = cfg.network_config(ckpt_cfg["class_count"], ckpt_cfg["input_size"], input_channels)
    model = build_model(cfg.model_kind, net_cfg, channels, ckpt_cfg["seed"], _precision_dtype(cfg))
    named = model.named_tensors()
    for name, tensor in named.items():
        if name not in tensors:
            raise CliError(f"{path}: checkpoint is missing tensor record {name!r}")
        tensor.data = tensors[name].astype(tensor.dtype).reshape(tensor.shape)
    return model, ckpt_cfg


def cmd_evaluate(checkpoint_path: Path, data_dir: Path, split_name: str, out_path: Path | None) -> dict:
    if split_name not in SPLIT_FILES:
        raise CliError(f"unknown split {split_name!r}; expected one of {sorted(SPLIT_FILES)}")
    model, ckpt_cfg = model_from_checkpoint(checkpoint_path)
    dataset = dp.load_container(data_dir / SPLIT_FILES[split_name])
    dtype = np.float64 if ckpt_cfg.get("precision") == "f64" else np.float32
    metrics = evaluate(model, _cast_dataset(dataset, dtype))
    payload = {
        "split": split_name,
        "samples": len(dataset),
        "metrics": metrics.as_dict(),
        "config": ckpt_cfg["run_config"],
    }
    if out_path:
        _write_json(out_path, payload)
    return payload


# ---------------------------------------------------------------------------
# compare

def cmd_compare(report_paths: list[Path], out_path: Path | None) -> dict:
    vectors = {}
    for i, path in enumerate(report_paths):
        report = json.loads(Path(path).read_text())
        if "channel_weights" not in report:
            raise CliError(f"{path}: report has no channel weights (plain model?)")
        name = f"{report['method']}#{i}"
        vectors[name] = np.asarray(report["channel_weights"], dtype=np.float64)
    names, matrix = importance_correlation_matrix(vectors)
    payload = {"methods": names, "spearman_matrix": matrix.tolist()}
    if out_path:
        _write_json(out_path, payload)
    return payload


def _render_compare_table(payload: dict) -> str:
    names = payload["methods"]
    width = max(len(n) for n in names) + 2
    lines = [" " * width + "".join(f"{n:>{width}}" for n in names)]
    for name, row in zip(names, payload["spearman_matrix"]):
        lines.append(f"{name:>{width}}" + "".join(f"{v:>{width}.3f}" for v in row))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# gradcheck

def cmd_gradcheck(seed: int) -> tuple[list[tuple[str, float, bool]], bool]:
    from .opchecks import run_all_checks

    rows = run_all_checks(seed=seed)
    return rows, all(ok for _, _, ok in rows)


# ---------------------------------------------------------------------------
# entry point

def _set_threads(n: int | None) -> None:
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        print("warning: threadpoolctl unavailable, --threads ignored", file=sys.stderr)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcmix", description="channel-mixing experiment stack")
    parser.add_argument("--config", type=Path, help="run config file (key = value sections)")
    parser.add_argument("--seed", type=int, help="override the config seeds")
    parser.add_argument("--out", type=Path, help="output directory or file")
    parser.add_argument("--threads", type=int, help="BLAS thread cap (1 = deterministic mode)")
    parser.add_argument("--precision", choices=("f32", "f64"), help="override training precision")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("prepare", help="build and cache the dataset splits")

    p_train = sub.add_parser("train", help="train a model on prepared data")
    p_train.add_argument("--data", type=Path, required=True, help="directory written by prepare")

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--data", type=Path, required=True)
    p_eval.add_argument("--split", default="holdout")

    p_cmp = sub.add_parser("compare", help="correlate importance reports")
    p_cmp.add_argument("reports", nargs="+", type=Path)

    sub.add_parser("gradcheck", help="finite-difference check of every registered op")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        from dataclasses import replace

        cfg.data.seed = args.seed
        cfg.train = replace(cfg.train, seed=args.seed)
    if args.precision:
        cfg.precision = args.precision
    return cfg


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    _set_threads(args.threads)
    try:
        if args.command == "prepare":
            cfg = _resolve_config(args)
            out_dir = args.out or Path(os.environ.get(DATA_DIR_ENV, "data"))
            manifest = cmd_prepare(cfg, out_dir)
            print(json.dumps({"channels": manifest["channels"], "counts": manifest["counts"]}))
        elif args.command == "train":
            cfg = _resolve_config(args)
            out_dir = args.out or Path("run")
            report = cmd_train(cfg, args.data, out_dir)
            summary = {"method": report["method"], "metrics": report["metrics"]["accuracy"]}
            if "ranking" in report:
                summary["ranking"] = report["ranking"]
            print(json.dumps(summary))
        elif args.command == "evaluate":
            payload = cmd_evaluate(args.checkpoint, args.data, args.split, args.out)
            print(json.dumps(payload["metrics"]))
        elif args.command == "compare":
            payload = cmd_compare(args.reports, args.out)
            print(_render_compare_table(payload))
        elif args.command == "gradcheck":
            rows, passed = cmd_gradcheck(args.seed if args.seed is not None else 0)
            for name, err, ok in rows:
                print(f"{name:<24} {err:12.3e}  {'PASS' if ok else 'FAIL'}")
            return 0 if passed else 1
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
