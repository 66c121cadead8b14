"""Binary and flat grayscale morphology, and the Moop feature maps.

Pixels outside the raster count as background (False / 0.0) for every
operation, so erosion always clears the border a structuring element
reaches past.
"""

from dataclasses import dataclass

import numpy as np

from sfenet.imagecore import StructuringElement, gray_plane


DEFAULT_ELEMENT = StructuringElement.square(3)


@dataclass
class MorphFeatureMap:
    gradient: np.ndarray
    opening_residual: np.ndarray


def _shifted(a, dy, dx, fill):
    """out[..., y, x] = a[..., y + dy, x + dx], `fill` where that falls outside."""
    out = np.full_like(a, fill)
    h, w = a.shape[-2:]
    if abs(dy) >= h or abs(dx) >= w:
        return out
    src_y = slice(max(dy, 0), h + min(dy, 0))
    src_x = slice(max(dx, 0), w + min(dx, 0))
    dst_y = slice(max(-dy, 0), h + min(-dy, 0))
    dst_x = slice(max(-dx, 0), w + min(-dx, 0))
    out[..., dst_y, dst_x] = a[..., src_y, src_x]
    return out


def erode(a, b=DEFAULT_ELEMENT):
    a = np.asarray(a, dtype=bool)
    out = np.ones_like(a)
    for dy, dx in b.offsets:
        out &= _shifted(a, dy, dx, False)
    return out


def dilate(a, b=DEFAULT_ELEMENT):
    a = np.asarray(a, dtype=bool)
    out = np.zeros_like(a)
    for dy, dx in b.reflect().offsets:
        out |= _shifted(a, dy, dx, False)
    return out


def open(a, b=DEFAULT_ELEMENT):
    return dilate(erode(a, b), b)


def close(a, b=DEFAULT_ELEMENT):
    return erode(dilate(a, b), b)


def gray_erode(img, b=DEFAULT_ELEMENT):
    img = np.asarray(img, dtype=np.float64)
    out = np.full_like(img, np.inf)
    for dy, dx in b.offsets:
        np.minimum(out, _shifted(img, dy, dx, 0.0), out=out)
    return out


def gray_dilate(img, b=DEFAULT_ELEMENT):
    img = np.asarray(img, dtype=np.float64)
    out = np.full_like(img, -np.inf)
    for dy, dx in b.reflect().offsets:
        np.maximum(out, _shifted(img, dy, dx, 0.0), out=out)
    return out


def gray_open(img, b=DEFAULT_ELEMENT):
    return gray_dilate(gray_erode(img, b), b)


def gray_close(img, b=DEFAULT_ELEMENT):
    return gray_erode(gray_dilate(img, b), b)


def moop_features(img, b=DEFAULT_ELEMENT):
    g = gray_plane(img)
    gradient = np.clip(gray_dilate(g, b) - gray_erode(g, b), 0.0, 1.0)
    residual = np.clip(g - gray_open(g, b), 0.0, 1.0)
    return MorphFeatureMap(gradient=gradient, opening_residual=residual)
