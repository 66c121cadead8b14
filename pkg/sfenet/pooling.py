"""Grid pooling of feature maps and per-frame extraction of the five streams.

Stream order is fixed: Text, Comr, Hifr, Lico, Moop.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np

from sfenet.compression import QuantSpec, comr_features
from sfenet.imagecore import StructuringElement, check_image, grid_slices, gray_plane
from sfenet.morphology import moop_features
from sfenet.photometry import lico_features
from sfenet.spectral import HighPassSpec, phase_reconstruct
from sfenet.texture import GLCM_OFFSETS, GLCM_STATS, text_features


STREAMS = ('Text', 'Comr', 'Hifr', 'Lico', 'Moop')


@dataclass(frozen=True)
class FeatureConfig:
    grid: int = 4
    quality: int = 50
    hp_radius: Optional[int] = None  # None: floor(min(H, W) / 8)
    glcm_levels: int = 8
    element: StructuringElement = field(default_factory=lambda: StructuringElement.square(3))

    def high_pass(self, h, w):
        if self.hp_radius is None:
            return HighPassSpec.auto(h, w)
        return HighPassSpec(self.hp_radius)

    def fingerprint(self):
        d = asdict(self)
        d['element'] = [list(o) for o in self.element.offsets]
        blob = json.dumps(d, sort_keys=True).encode('utf-8')
        return hashlib.sha1(blob).hexdigest()[:12]


@dataclass
class FeatureBundle:
    vectors: Dict[str, np.ndarray]
    config_hash: str

    def __getitem__(self, stream):
        return self.vectors[stream]

    def concatenated(self):
        return np.concatenate([self.vectors[s] for s in STREAMS])


def stream_dims(cfg, channels=3):
    cells = cfg.grid * cfg.grid
    return {
        'Text': 256 + len(GLCM_OFFSETS) * len(GLCM_STATS),
        'Comr': 2 * cells,
        'Hifr': 2 * cells,
        'Lico': channels + cells * channels,
        'Moop': 4 * cells,
    }


def pool_map(feature_map, grid):
    feature_map = np.asarray(feature_map, dtype=np.float64)
    h, w = feature_map.shape
    out = []
    for rows, cols in grid_slices(h, w, grid):
        cell = feature_map[rows, cols]
        mu = np.mean(cell)
        out.extend([mu, np.sqrt(np.mean((cell - mu) ** 2))])
    return np.array(out)


def extract_maps(img, cfg):
    """The single-channel maps behind the pooled streams, keyed by name."""
    img = check_image(img, channels=(1, 3))
    g = gray_plane(img)
    h, w = g.shape
    moop = moop_features(g, cfg.element)
    return {
        'Comr': comr_features(g, QuantSpec(cfg.quality)),
        'Hifr': phase_reconstruct(g, cfg.high_pass(h, w)),
        'Moop_gradient': moop.gradient,
        'Moop_residual': moop.opening_residual,
    }


def extract_bundle(img, cfg):
    img = check_image(img, channels=(1, 3))
    maps = extract_maps(img, cfg)
    vectors = {
        'Text': text_features(img, cfg.glcm_levels).flatten(),
        'Comr': pool_map(maps['Comr'], cfg.grid),
        'Hifr': pool_map(maps['Hifr'], cfg.grid),
        'Lico': lico_features(img, cfg.grid).flatten(),
        'Moop': np.concatenate([pool_map(maps['Moop_gradient'], cfg.grid),
                                pool_map(maps['Moop_residual'], cfg.grid)]),
    }
    for stream, v in vectors.items():
        assert np.all(np.isfinite(v)), 'non-finite %s features' % stream
    return FeatureBundle(vectors=vectors, config_hash=cfg.fingerprint())
