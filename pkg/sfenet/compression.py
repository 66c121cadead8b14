"""JPEG-style luminance compress/reconstruct round trip and the Comr residual."""

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from sfenet.imagecore import gray_plane


# Annex K luminance table
LUMINANCE_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
])

BLOCK = 8


def scaled_table(quality):
    if quality < 50:
        scale = 5000.0 / quality
    else:
        scale = 200 - 2 * quality
    return np.clip(np.floor((LUMINANCE_TABLE * scale + 50) / 100), 1, 255)


@dataclass(frozen=True)
class QuantSpec:
    quality: int = 50

    def __post_init__(self):
        if not 1 <= self.quality <= 100:
            raise ValueError('quality must be in 1..100, got %r' % self.quality)

    @property
    def table(self):
        return scaled_table(self.quality).astype(np.float64)


def _check_block(block):
    block = np.asarray(block, dtype=np.float64)
    if block.shape[-2:] != (BLOCK, BLOCK):
        raise ValueError('expected 8x8 block(s), got shape %r' % (block.shape,))
    return block


def dct8(block):
    return dctn(_check_block(block), type=2, norm='ortho', axes=(-2, -1))


def idct8(block):
    return idctn(_check_block(block), type=2, norm='ortho', axes=(-2, -1))


def _to_blocks(plane):
    h, w = plane.shape
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def _from_blocks(blocks):
    by, bx = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(by * BLOCK, bx * BLOCK)


def roundtrip(img, q):
    plane = gray_plane(img)
    h, w = plane.shape
    pad_h, pad_w = -h % BLOCK, -w % BLOCK
    shifted = np.pad(plane * 255.0 - 128.0, ((0, pad_h), (0, pad_w)), mode='edge')
    table = q.table
    coef = dct8(_to_blocks(shifted))
    quantized = np.round(coef / table) * table
    restored = _from_blocks(idct8(quantized))[:h, :w]
    return np.clip((restored + 128.0) / 255.0, 0.0, 1.0)


def comr_features(img, q):
    plane = gray_plane(img)
    return np.clip(np.abs(plane - roundtrip(plane, q)), 0.0, 1.0)
