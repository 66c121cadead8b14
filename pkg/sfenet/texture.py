"""Texture statistics (Text): 8-neighbour LBP histogram plus GLCM Haralick subset."""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from sfenet.imagecore import gray_plane


# clockwise from top-left; bit p carries weight 2**p
LBP_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))

GLCM_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))
GLCM_STATS = ('contrast', 'energy', 'homogeneity', 'correlation')
DEFAULT_LEVELS = 8


@dataclass
class Glcm:
    levels: int
    offset: Tuple[int, int]
    probs: np.ndarray


@dataclass
class TextureFeature:
    lbp_histogram: np.ndarray
    glcm_stats: Dict[Tuple[int, int], Dict[str, float]]

    def flatten(self):
        stats = [self.glcm_stats[offset][name] for offset in GLCM_OFFSETS for name in GLCM_STATS]
        return np.concatenate([self.lbp_histogram, np.array(stats)])


def _plane(img, min_size=1):
    g = gray_plane(img)
    if g.shape[0] < min_size or g.shape[1] < min_size:
        raise ValueError('image too small: %ix%i, need at least %ix%i' % (g.shape + (min_size, min_size)))
    return g


def lbp(img):
    g = _plane(img, min_size=3)
    h, w = g.shape
    center = g[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.int64)
    for p, (dy, dx) in enumerate(LBP_NEIGHBORS):
        neighbor = g[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        codes |= (neighbor >= center).astype(np.int64) << p
    return codes


def quantize(g, levels):
    return np.minimum(np.floor(g * levels).astype(np.int64), levels - 1)


def glcm(img, levels=DEFAULT_LEVELS, offset=(0, 1), symmetric=True):
    if levels < 2:
        raise ValueError('GLCM needs at least 2 levels, got %r' % levels)
    dy, dx = offset
    if (dy, dx) == (0, 0):
        raise ValueError('GLCM offset must not be (0, 0)')
    q = quantize(_plane(img), levels)
    h, w = q.shape
    if abs(dy) >= h or abs(dx) >= w:
        raise ValueError('offset %r leaves no pixel pairs in a %ix%i image' % (offset, h, w))
    rows_a = slice(max(-dy, 0), h - max(dy, 0))
    cols_a = slice(max(-dx, 0), w - max(dx, 0))
    rows_b = slice(max(dy, 0), h - max(-dy, 0))
    cols_b = slice(max(dx, 0), w - max(-dx, 0))
    pairs = q[rows_a, cols_a].ravel() * levels + q[rows_b, cols_b].ravel()
    counts = np.bincount(pairs, minlength=levels * levels).reshape(levels, levels).astype(np.float64)
    if symmetric:
        counts = counts + counts.T
    return Glcm(levels=levels, offset=(dy, dx), probs=counts / counts.sum())


def glcm_stats(m):
    p = m.probs
    i, j = np.indices(p.shape)
    contrast = np.sum(p * (i - j) ** 2)
    energy = np.sum(p ** 2)
    homogeneity = np.sum(p / (1.0 + np.abs(i - j)))
    mu_i, mu_j = np.sum(i * p), np.sum(j * p)
    sigma_i = np.sqrt(np.sum((i - mu_i) ** 2 * p))
    sigma_j = np.sqrt(np.sum((j - mu_j) ** 2 * p))
    if sigma_i == 0.0 or sigma_j == 0.0:
        correlation = 0.0
    else:
        correlation = np.sum((i - mu_i) * (j - mu_j) * p) / (sigma_i * sigma_j)
    return {'contrast': float(contrast), 'energy': float(energy),
            'homogeneity': float(homogeneity), 'correlation': float(correlation)}


def text_features(img, levels=DEFAULT_LEVELS):
    g = _plane(img, min_size=3)
    codes = lbp(g)
    histogram = np.bincount(codes.ravel(), minlength=256).astype(np.float64) / codes.size
    stats = {offset: glcm_stats(glcm(g, levels, offset, symmetric=True)) for offset in GLCM_OFFSETS}
    return TextureFeature(lbp_histogram=histogram, glcm_stats=stats)
