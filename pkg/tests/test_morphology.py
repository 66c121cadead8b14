import itertools

import numpy as np
import pytest

from sfenet.imagecore import StructuringElement, threshold
from sfenet.morphology import (close, dilate, erode, gray_close, gray_dilate, gray_erode, gray_open, moop_features,
                               open)


np.random.seed(666)

SQUARE = StructuringElement.square(3)
CROSS = StructuringElement.cross()
ORIGIN = StructuringElement.origin()


def oracle_erode(a, b):
    h, w = a.shape
    out = np.zeros_like(a, dtype=bool)
    for y, x in itertools.product(range(h), range(w)):
        out[y, x] = all(0 <= y + dy < h and 0 <= x + dx < w and a[y + dy, x + dx] for dy, dx in b.offsets)
    return out


def oracle_dilate(a, b):
    h, w = a.shape
    out = np.zeros_like(a, dtype=bool)
    for y, x in itertools.product(range(h), range(w)):
        out[y, x] = any(0 <= y - dy < h and 0 <= x - dx < w and a[y - dy, x - dx] for dy, dx in b.offsets)
    return out


def all_binary_images(h, w):
    codes = np.arange(2 ** (h * w), dtype=np.int64)
    bits = (codes[:, None] >> np.arange(h * w)) & 1
    return bits.astype(bool).reshape(-1, h, w)


def batch_oracle_erode(a, b):
    """Set definition over a batch: every translate must land inside the raster and on foreground."""
    n, h, w = a.shape
    padded = np.zeros((n, h + 4, w + 4), dtype=bool)
    padded[:, 2:-2, 2:-2] = a
    out = np.ones_like(a)
    for dy, dx in b.offsets:
        out &= padded[:, 2 + dy:2 + dy + h, 2 + dx:2 + dx + w]
    return out


def batch_oracle_dilate(a, b):
    n, h, w = a.shape
    padded = np.zeros((n, h + 4, w + 4), dtype=bool)
    padded[:, 2:-2, 2:-2] = a
    out = np.zeros_like(a)
    for dy, dx in b.offsets:
        out |= padded[:, 2 - dy:2 - dy + h, 2 - dx:2 - dx + w]
    return out


def test_erode_examples():
    assert np.array_equal(erode(np.ones((3, 3), dtype=bool), SQUARE),
                          np.array([[0, 0, 0], [0, 1, 0], [0, 0, 0]], dtype=bool))
    a = np.random.uniform(size=(6, 6)) > 0.5
    assert np.array_equal(erode(a, ORIGIN), a)
    assert np.array_equal(dilate(a, ORIGIN), a)


def test_dilate_examples():
    a = np.zeros((5, 5), dtype=bool)
    a[2, 2] = True
    expected = np.zeros((5, 5), dtype=bool)
    expected[1:4, 1:4] = True
    assert np.array_equal(dilate(a, SQUARE), expected)
    assert not dilate(np.zeros((5, 5), dtype=bool), SQUARE).any()


def test_random_against_oracle():
    asym = StructuringElement(((0, 0), (0, 1), (1, 1), (-1, 0)))
    for b in (CROSS, SQUARE, asym):
        for _ in range(20):
            a = np.random.uniform(size=(8, 8)) > 0.4
            assert np.array_equal(erode(a, b), oracle_erode(a, b))
            assert np.array_equal(dilate(a, b), oracle_dilate(a, b))


def test_exhaustive_4x4_cross():
    images = all_binary_images(4, 4)
    assert len(images) == 65536

    # spot-check the batch oracle against the per-pixel one
    for idx in np.random.randint(0, len(images), size=50):
        assert np.array_equal(batch_oracle_erode(images[idx:idx + 1], CROSS)[0], oracle_erode(images[idx], CROSS))
        assert np.array_equal(batch_oracle_dilate(images[idx:idx + 1], CROSS)[0], oracle_dilate(images[idx], CROSS))

    eroded = erode(images, CROSS)
    dilated = dilate(images, CROSS)
    assert np.array_equal(eroded, batch_oracle_erode(images, CROSS))
    assert np.array_equal(dilated, batch_oracle_dilate(images, CROSS))
    assert np.array_equal(open(images, CROSS), batch_oracle_dilate(batch_oracle_erode(images, CROSS), CROSS))
    assert np.array_equal(close(images, CROSS), batch_oracle_erode(batch_oracle_dilate(images, CROSS), CROSS))


def test_open_close_properties():
    single = np.zeros((7, 7), dtype=bool)
    single[3, 3] = True
    assert not open(single, SQUARE).any()

    for _ in range(20):
        a = np.random.uniform(size=(10, 10)) > 0.5
        for b in (SQUARE, CROSS):
            opened = open(a, b)
            assert np.array_equal(open(opened, b), opened)
            assert np.array_equal(opened, dilate(erode(a, b), b))
            assert not (opened & ~a).any()
            assert not (a & ~close(a, b)).any()
            assert not (erode(a, b) & ~a).any()
            assert not (a & ~dilate(a, b)).any()


def test_duality_in_interior():
    for _ in range(20):
        a = np.random.uniform(size=(9, 9)) > 0.5
        lhs = ~erode(a, SQUARE)
        rhs = dilate(~a, SQUARE)
        assert np.array_equal(lhs[1:-1, 1:-1], rhs[1:-1, 1:-1])


def test_gray_matches_binary():
    for _ in range(10):
        a = (np.random.uniform(size=(8, 8)) > 0.5).astype(np.float64)
        binary = threshold(a, 0.5)
        assert np.array_equal(gray_erode(a, CROSS) >= 0.5, erode(binary, CROSS))
        assert np.array_equal(gray_dilate(a, CROSS) >= 0.5, dilate(binary, CROSS))
        assert np.array_equal(gray_open(a, SQUARE) >= 0.5, open(binary, SQUARE))
        assert np.array_equal(gray_close(a, SQUARE) >= 0.5, close(binary, SQUARE))


def test_gray_trivial_cases():
    img = np.full((5, 5), 0.4)
    assert np.array_equal(gray_erode(img, ORIGIN), img)
    assert np.array_equal(gray_dilate(img, ORIGIN), img)
    zero = np.zeros((5, 5))
    assert np.array_equal(gray_erode(zero, SQUARE), zero)
    assert np.array_equal(gray_dilate(zero, SQUARE), zero)


def test_gray_border_reads_zero():
    img = np.full((5, 5), 0.6)
    eroded = gray_erode(img, SQUARE)
    assert np.all(eroded[1:-1, 1:-1] == 0.6)
    assert np.all(eroded[0] == 0.0) and np.all(eroded[:, -1] == 0.0)
    assert np.array_equal(gray_dilate(img, SQUARE), img)


def test_moop_constant():
    f = moop_features(np.full((8, 8), 0.7))
    assert np.all(f.gradient[1:-1, 1:-1] == 0)
    assert np.all(f.opening_residual[1:-1, 1:-1] == 0)


def test_moop_step_edge():
    img = np.zeros((8, 8))
    img[:, 4:] = 1.0
    grad = moop_features(img).gradient[1:-1, 1:-1]
    expected = np.zeros((6, 6))
    expected[:, 2:4] = 1.0  # columns 3 and 4 of the full image
    assert np.array_equal(grad, expected)


def test_moop_bright_pixel():
    img = np.zeros((7, 7))
    img[3, 3] = 0.8
    f = moop_features(img)
    assert f.opening_residual[3, 3] == pytest.approx(0.8, abs=0)
    assert np.all(f.opening_residual >= 0) and np.all(f.opening_residual <= 1)
