import numpy as np

from dcmix.data import load_mnist_idx
from dcmix.digits import (
    _load_fonts,
    generate_digit_images,
    generate_idx_files,
    render_digit,
)


def test_render_shape_and_dtype():
    font = _load_fonts()[0]
    img = render_digit(7, font, rotation=0.0, scale=1.0, dx=0.0, dy=0.0)
    assert img.shape == (28, 28)
    assert img.dtype == np.uint8


def test_render_has_ink_on_dark_background():
    font = _load_fonts()[0]
    img = render_digit(8, font, rotation=5.0, scale=1.0, dx=1.0, dy=-1.0)
    assert img.max() > 128  # bright strokes
    assert np.mean(img < 32) > 0.4  # mostly dark background


def test_jitter_changes_the_image():
    font = _load_fonts()[0]
    base = render_digit(3, font, 0.0, 1.0, 0.0, 0.0)
    rotated = render_digit(3, font, 15.0, 1.0, 0.0, 0.0)
    shifted = render_digit(3, font, 0.0, 1.0, 3.0, 0.0)
    assert not np.array_equal(base, rotated)
    assert not np.array_equal(base, shifted)


def test_generate_deterministic_per_seed():
    a_imgs, a_lbls = generate_digit_images(20, seed=4)
    b_imgs, b_lbls = generate_digit_images(20, seed=4)
    np.testing.assert_array_equal(a_imgs, b_imgs)
    np.testing.assert_array_equal(a_lbls, b_lbls)
    c_imgs, _ = generate_digit_images(20, seed=5)
    assert not np.array_equal(a_imgs, c_imgs)


def test_generate_covers_all_classes():
    _, labels = generate_digit_images(200, seed=0)
    assert set(np.unique(labels)) == set(range(10))


def test_idx_files_load_back(tmp_path):
    images_path, labels_path = generate_idx_files(15, seed=2, out_dir=tmp_path)
    ds = load_mnist_idx(images_path, labels_path)
    assert ds.images.shape == (15, 28, 28, 1)
    expected_imgs, expected_lbls = generate_digit_images(15, seed=2)
    np.testing.assert_array_equal(ds.images[..., 0], expected_imgs)
    np.testing.assert_array_equal(ds.labels, expected_lbls)
