"""Rendered-digit corpus generator.

Real handwritten digit files are not always available offline, so this
module renders 28x28 grayscale digits (0-9) with the system DejaVu fonts
under random affine jitter and writes them in the exact big-endian IDX
format that load_mnist_idx consumes. Generation is deterministic per seed.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .data import IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC

_FONT_DIR = Path("/usr/share/fonts/truetype/dejavu")
_FONT_FILES = [
    "DejaVuSans.ttf",
    "DejaVuSans-Bold.ttf",
    "DejaVuSerif.ttf",
    "DejaVuSerif-Bold.ttf",
    "DejaVuSansMono.ttf",
    "DejaVuSansMono-Bold.ttf",
]
_CANVAS = 48  # oversized render canvas, downsampled to 28x28


def _load_fonts() -> list[ImageFont.FreeTypeFont]:
    fonts = []
    for name in _FONT_FILES:
        path = _FONT_DIR / name
        if path.exists():
            fonts.append(ImageFont.truetype(str(path), size=34))
    if not fonts:
        raise FileNotFoundError(f"no DejaVu fonts found under {_FONT_DIR}")
    return fonts


def render_digit(digit: int, font: ImageFont.FreeTypeFont, rotation: float,
                 scale: float, dx: float, dy: float) -> np.ndarray:
    """One 28x28 uint8 digit image under the given affine jitter."""
    canvas = Image.new("L", (_CANVAS, _CANVAS), 0)
    draw = ImageDraw.Draw(canvas)
    text = str(digit)
    left, top, right, bottom = draw.textbbox((0, 0), text, font=font)
    x = (_CANVAS - (right - left)) / 2 - left
    y = (_CANVAS - (bottom - top)) / 2 - top
    draw.text((x, y), text, fill=255, font=font)
    canvas = canvas.rotate(rotation, resample=Image.BILINEAR, translate=(dx, dy))
    side = int(round(_CANVAS / scale))
    pad = (_CANVAS - side) // 2
    if pad > 0:
        canvas = canvas.crop((pad, pad, pad + side, pad + side))
    elif pad < 0:
        grown = Image.new("L", (side, side), 0)
        grown.paste(canvas, (-pad, -pad))
        canvas = grown
    canvas = canvas.resize((28, 28), resample=Image.BILINEAR)
    return np.asarray(canvas, dtype=np.uint8)


def generate_digit_images(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n rendered digits as ([n,28,28] uint8, [n] labels)."""
    fonts = _load_fonts()
    rng = np.random.default_rng(seed)
    images = np.zeros((n, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=n)
    for i in range(n):
        images[i] = render_digit(
            int(labels[i]),
            fonts[int(rng.integers(0, len(fonts)))],
            rotation=float(rng.uniform(-20.0, 20.0)),
            scale=float(rng.uniform(0.75, 1.2)),
            dx=float(rng.uniform(-4.0, 4.0)),
            dy=float(rng.uniform(-4.0, 4.0)),
        )
    return images, labels.astype(np.int64)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write big-endian IDX image/label files."""
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(np.ascontiguousarray(images, dtype=np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, n))
        f.write(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())


def generate_idx_files(n: int, seed: int, out_dir) -> tuple[Path, Path]:
    """Render a digit corpus and write it as an IDX image/label file pair."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images, labels = generate_digit_images(n, seed)
    images_path = out_dir / "digits-images-idx3-ubyte"
    labels_path = out_dir / "digits-labels-idx1-ubyte"
    write_idx(images, labels, images_path, labels_path)
    return images_path, labels_path
