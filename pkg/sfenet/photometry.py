"""Lighting consistency (Lico): per-channel population variance, globally and per grid cell."""

from dataclasses import dataclass

import numpy as np

from sfenet.imagecore import check_image, grid_slices


DEFAULT_GRID = 4


@dataclass
class LightingFeature:
    global_variance: np.ndarray  # (C,)
    block_variances: np.ndarray  # (G, G, C)

    def flatten(self):
        return np.concatenate([self.global_variance, self.block_variances.reshape(-1)])


def _channel(img, c):
    img = check_image(img)
    if not 0 <= c < img.shape[2]:
        raise ValueError('channel %r out of range for %i-channel image' % (c, img.shape[2]))
    return img[:, :, c]


def channel_mean(img, c):
    return float(np.mean(_channel(img, c)))


def lighting_score(img, c):
    plane = _channel(img, c)
    mu = np.mean(plane)
    return float(np.mean((plane - mu) ** 2))


def lico_features(img, grid=DEFAULT_GRID):
    img = check_image(img)
    h, w, channels = img.shape
    cells = grid_slices(h, w, grid)
    global_variance = np.array([lighting_score(img, c) for c in range(channels)])
    blocks = np.empty((grid * grid, channels))
    for k, (rows, cols) in enumerate(cells):
        cell = img[rows, cols]
        blocks[k] = [lighting_score(cell, c) for c in range(channels)]
    return LightingFeature(global_variance=global_variance,
                           block_variances=blocks.reshape(grid, grid, channels))
