"""Dataset construction: IDX parsing, noise-channel injection, normalization,
patch extraction, stratified splits, a synthetic multispectral generator with
known channel importance, and the on-disk dataset container.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CONTAINER_MAGIC = b"DCMX1"


class IdxFormatError(ValueError):
    """Malformed IDX file."""


class ContainerError(ValueError):
    """Malformed dataset container."""


@dataclass
class LabeledDataset:
    """Images [N,h,w,c] with integer class labels.

    ground_truth_importance, when known (noise-augmented and synthetic sets),
    is a 1-based descending-importance channel ranking.
    """

    images: np.ndarray
    labels: np.ndarray
    ground_truth_importance: Optional[tuple[int, ...]] = None
    split_tag: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(
                f"images ({len(self.images)}) and labels ({len(self.labels)}) differ in length"
            )
        if self.images.ndim != 4:
            raise ValueError(f"images must be [N,h,w,c], got shape {self.images.shape}")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def channel_count(self) -> int:
        return self.images.shape[3]

    def take(self, indices: np.ndarray, split_tag: Optional[str] = None) -> "LabeledDataset":
        return replace(
            self,
            images=self.images[indices],
            labels=self.labels[indices],
            split_tag=self.split_tag if split_tag is None else split_tag,
        )


@dataclass(frozen=True)
class SplitSpec:
    holdout_fraction: float = 0.30
    validation_fraction_of_train: float = 0.20
    seed: int = 0

    def __post_init__(self):
        for name in ("holdout_fraction", "validation_fraction_of_train"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0,1), got {v}")


# ---------------------------------------------------------------------------
# IDX ingestion

def _read_u32(f, path) -> int:
    raw = f.read(4)
    if len(raw) != 4:
        raise IdxFormatError(f"{path}: truncated header")
    return struct.unpack(">I", raw)[0]


def load_mnist_idx(images_path, labels_path) -> LabeledDataset:
    """Parse big-endian IDX image/label files into 28x28x1 (or hxwx1) images."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as f:
        magic = _read_u32(f, images_path)
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x} for images"
            )
        count, rows, cols = (_read_u32(f, images_path) for _ in range(3))
        raw = f.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise IdxFormatError(f"{images_path}: truncated pixel data ({len(raw)} bytes)")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols, 1)
    with open(labels_path, "rb") as f:
        magic = _read_u32(f, labels_path)
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x} for labels"
            )
        lcount = _read_u32(f, labels_path)
        raw = f.read(lcount)
        if len(raw) != lcount:
            raise IdxFormatError(f"{labels_path}: truncated label data")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if lcount != count:
        raise IdxFormatError(
            f"count mismatch: {images_path} has {count} images but {labels_path} has {lcount} labels"
        )
    return LabeledDataset(images=images, labels=labels)


# ---------------------------------------------------------------------------
# transforms

def subsample(dataset: LabeledDataset, n: int, seed: int) -> LabeledDataset:
    """Uniform draw of n samples without replacement, deterministic per seed."""
    if n > len(dataset):
        raise ValueError(f"cannot subsample {n} from {len(dataset)} samples")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(dataset), size=n, replace=False)
    return dataset.take(idx)


def add_noise_channels(dataset: LabeledDataset, k: int, seed: int) -> LabeledDataset:
    """Append k channels of per-image i.i.d. uniform integer noise on [0,255].

    The original channels stay first and remain the informative ones, so the
    ground-truth ranking puts channel 1 on top with the noise channels in an
    arbitrary tier behind it.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    n, h, w, c = dataset.images.shape
    noise = rng.integers(0, 256, size=(n, h, w, k), dtype=np.int64).astype(dataset.images.dtype)
    images = np.concatenate([dataset.images, noise], axis=3)
    ranking = tuple(range(1, c + 1)) + tuple(range(c + 1, c + k + 1))
    return replace(dataset, images=images, ground_truth_importance=ranking)


def normalize_01(dataset: LabeledDataset) -> LabeledDataset:
    """Map raw 8-bit values to [0,1] by dividing by 255."""
    return replace(dataset, images=(dataset.images.astype(np.float32) / 255.0))


def denormalize(dataset: LabeledDataset) -> LabeledDataset:
    return replace(dataset, images=dataset.images * 255.0)


def percentile_normalize(image: np.ndarray, p_low: float = 1.0, p_high: float = 99.0) -> np.ndarray:
    """Per-channel percentile normalization with clipping to [0,1].

    A constant channel (equal percentiles) maps to all-0.5 rather than NaN.
    """
    if not p_low < p_high:
        raise ValueError(f"p_low must be < p_high, got {p_low}, {p_high}")
    img = np.asarray(image, dtype=np.float64)
    out = np.empty_like(img)
    for ch in range(img.shape[-1]):
        lo, hi = np.percentile(img[..., ch], [p_low, p_high])
        if hi == lo:
            out[..., ch] = 0.5
        else:
            out[..., ch] = np.clip((img[..., ch] - lo) / (hi - lo), 0.0, 1.0)
    return out


def extract_patches(image: np.ndarray, size: int, offset: int) -> list[np.ndarray]:
    """Grid of fully contained size x size patches at stride `offset`."""
    h, w = image.shape[0], image.shape[1]
    if size > h or size > w:
        raise ValueError(f"patch size {size} exceeds image dims {h}x{w}")
    patches = []
    for top in range(0, h - size + 1, offset):
        for left in range(0, w - size + 1, offset):
            patches.append(image[top : top + size, left : left + size])
    return patches


def split(dataset: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Stratified (train, validation, holdout) split, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    train_idx, val_idx, hold_idx = [], [], []
    for cls in np.unique(dataset.labels):
        cls_idx = np.flatnonzero(dataset.labels == cls)
        if cls_idx.size == 0:
            raise ValueError(f"class {cls} has no samples")
        cls_idx = rng.permutation(cls_idx)
        n_hold = int(round(spec.holdout_fraction * cls_idx.size))
        rest = cls_idx[n_hold:]
        n_val = int(round(spec.validation_fraction_of_train * rest.size))
        hold_idx.append(cls_idx[:n_hold])
        val_idx.append(rest[:n_val])
        train_idx.append(rest[n_val:])
    order = lambda parts: np.sort(np.concatenate(parts))
    return (
        dataset.take(order(train_idx), "train"),
        dataset.take(order(val_idx), "validation"),
        dataset.take(order(hold_idx), "holdout"),
    )


# ---------------------------------------------------------------------------
# synthetic multispectral surrogate

def _blob(size: int, cy: float, cx: float, sigma: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    return np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2)))


def synth_multispectral(
    n: int,
    signal_channels: int,
    noise_channels: int,
    redundancy: float,
    seed: int,
    redundant_channels: int = 0,
    class_count: int = 4,
    size: int = 16,
) -> LabeledDataset:
    """Synthetic dataset with designed channel importance.

    Channel order: signal channels first (class-dependent Gaussian blob
    patterns), then redundant channels (each a `redundancy`-weighted mix of a
    signal channel and fresh uniform noise), then pure-noise channels.
    """
    if signal_channels < 1:
        raise ValueError(f"signal_channels must be >= 1, got {signal_channels}")
    if not 0.0 <= redundancy <= 1.0:
        raise ValueError(f"redundancy must be in [0,1], got {redundancy}")
    rng = np.random.default_rng(seed)
    # one blob template per (class, signal channel), positions drawn once
    templates = np.zeros((class_count, signal_channels, size, size))
    for k in range(class_count):
        for s in range(signal_channels):
            cy, cx = rng.uniform(size * 0.2, size * 0.8, size=2)
            templates[k, s] = _blob(size, cy, cx, sigma=size / 8.0)
    labels = rng.integers(0, class_count, size=n)
    total_c = signal_channels + redundant_channels + noise_channels
    images = np.zeros((n, size, size, total_c), dtype=np.float32)
    for s in range(signal_channels):
        brightness = rng.uniform(0.7, 1.0, size=(n, 1, 1))
        jitter = rng.normal(0.0, 0.05, size=(n, size, size))
        images[..., s] = np.clip(templates[labels, s] * brightness + jitter, 0.0, 1.0)
    for r in range(redundant_channels):
        src = images[..., r % signal_channels]
        images[..., signal_channels + r] = np.clip(
            redundancy * src + (1.0 - redundancy) * rng.uniform(0.0, 1.0, size=src.shape), 0.0, 1.0
        )
    for j in range(noise_channels):
        images[..., signal_channels + redundant_channels + j] = rng.uniform(0.0, 1.0, size=(n, size, size))
    ranking = tuple(range(1, total_c + 1))
    return LabeledDataset(images=images, labels=labels, ground_truth_importance=ranking)


# ---------------------------------------------------------------------------
# on-disk container
#
# Layout (little-endian):
#   magic   5 bytes  "DCMX1"
#   u32     height
#   u32     width
#   u32     channel count
#   u32     sample count
#   f32[N*h*w*c]  samples, row-major NHWC
#   i32[N]        labels
#   u8            1 if a ground-truth ranking block follows, else 0
#   u32[c]        ground-truth ranking (1-based), present iff flag == 1

def save_container(dataset: LabeledDataset, path) -> None:
    n, h, w, c = dataset.images.shape
    with open(path, "wb") as f:
        f.write(CONTAINER_MAGIC)
        f.write(struct.pack("<4I", h, w, c, n))
        f.write(np.ascontiguousarray(dataset.images, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(dataset.labels, dtype="<i4").tobytes())
        if dataset.ground_truth_importance is not None:
            f.write(b"\x01")
            f.write(np.asarray(dataset.ground_truth_importance, dtype="<u4").tobytes())
        else:
            f.write(b"\x00")


def load_container(path) -> LabeledDataset:
    with open(path, "rb") as f:
        magic = f.read(5)
        if magic != CONTAINER_MAGIC:
            raise ContainerError(f"{path}: bad magic {magic!r}, expected {CONTAINER_MAGIC!r}")
        header = f.read(16)
        if len(header) != 16:
            raise ContainerError(f"{path}: truncated header")
        h, w, c, n = struct.unpack("<4I", header)
        img_bytes = f.read(n * h * w * c * 4)
        if len(img_bytes) != n * h * w * c * 4:
            raise ContainerError(f"{path}: truncated image block")
        images = np.frombuffer(img_bytes, dtype="<f4").reshape(n, h, w, c)
        lbl_bytes = f.read(n * 4)
        if len(lbl_bytes) != n * 4:
            raise ContainerError(f"{path}: truncated label block")
        labels = np.frombuffer(lbl_bytes, dtype="<i4").astype(np.int64)
        flag = f.read(1)
        ranking = None
        if flag == b"\x01":
            rank_bytes = f.read(c * 4)
            if len(rank_bytes) != c * 4:
                raise ContainerError(f"{path}: truncated ranking block")
            ranking = tuple(int(v) for v in np.frombuffer(rank_bytes, dtype="<u4"))
        elif flag != b"\x00":
            raise ContainerError(f"{path}: truncated or corrupt trailer")
    return LabeledDataset(images=images.copy(), labels=labels, ground_truth_importance=ranking)
