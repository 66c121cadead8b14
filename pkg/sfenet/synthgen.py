"""Deterministic synthetic tampered videos, one forgery family per detector.

splice        hard-edged paste from a differently lit scene (edge/lighting)
smooth        Gaussian blur of a region (high-frequency loss)
recompress    low-quality block-DCT round trip of a region (compression)
texture_swap  region texture replaced by differently correlated noise (texture)

Randomness: every video draws from its own PCG64 generator seeded with
numpy.random.SeedSequence(seed, spawn_key=(video_index,)), so videos can be
rendered in any order or in parallel with identical results.
"""

import logging
import os
import shutil
import tempfile
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.ndimage import gaussian_filter
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

from sfenet.compression import QuantSpec, roundtrip
from sfenet.data import VideoRecord, write_landmarks, write_manifest
from sfenet.imagecore import write_pnm


log = logging.getLogger(__name__)

FAMILIES = ('splice', 'smooth', 'recompress', 'texture_swap')
UNIFORM_MIX = tuple((f, 0.25) for f in FAMILIES)

NOISE_AMPLITUDE = 0.04
DRIFT = 0.004
RECOMPRESS_QUALITY = 10

MANIFEST_NAME = 'manifest.jsonl'
OWNED_TREES = ('frames', 'landmarks')


@dataclass(frozen=True)
class GenConfig:
    seed: int = 7
    n_videos: int = 10
    frames: int = 4
    height: int = 64
    width: int = 64
    forgery_mix: Tuple[Tuple[str, float], ...] = UNIFORM_MIX
    severity: float = 0.8
    landmarks: int = 0

    def __post_init__(self):
        if self.n_videos < 1:
            raise ValueError('need at least one video, got %r' % self.n_videos)
        if self.frames < 2:
            raise ValueError('need at least 2 frames per video, got %r' % self.frames)
        if self.height < 16 or self.width < 16:
            raise ValueError('frames must be at least 16x16, got %ix%i' % (self.height, self.width))
        if not 0.0 < self.severity <= 1.0:
            raise ValueError('severity must be in (0, 1], got %r' % self.severity)
        if self.landmarks < 0:
            raise ValueError('landmark count must be non-negative, got %r' % self.landmarks)
        mix = tuple((str(f), float(p)) for f, p in self.forgery_mix)
        unknown = [f for f, _ in mix if f not in FAMILIES]
        if unknown:
            raise ValueError('unknown forgery families %r' % unknown)
        if any(p < 0 for _, p in mix) or abs(sum(p for _, p in mix) - 1.0) > 1e-9:
            raise ValueError('forgery mix proportions must be non-negative and sum to 1, got %r' % (mix,))
        object.__setattr__(self, 'forgery_mix', mix)


def parse_mix(text):
    """'splice=0.5,smooth=0.5' or a single family name."""
    text = text.strip()
    if '=' not in text:
        return ((text, 1.0),)
    mix = []
    for part in text.split(','):
        name, _, value = part.partition('=')
        try:
            mix.append((name.strip(), float(value)))
        except ValueError:
            raise ValueError('bad forgery mix entry %r' % part)
    return tuple(mix)


def video_rng(cfg, index):
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))


def _scene(cfg, rng):
    """Canvas large enough for the whole drift, and per-frame crop offsets."""
    h, w, t = cfg.height, cfg.width, cfg.frames
    ch, cw = h + t, w + t
    yy, xx = np.mgrid[0:ch, 0:cw] / np.array([ch, cw]).reshape(2, 1, 1)

    base = rng.uniform(0.3, 0.55, size=3)
    slope_y, slope_x = rng.uniform(-0.15, 0.15, size=(2, 3))
    canvas = base + yy[..., None] * slope_y + xx[..., None] * slope_x

    # soft elliptical "face"
    cy, cx = 0.5 + rng.uniform(-0.05, 0.05, size=2)
    ry, rx = rng.uniform(0.25, 0.35), rng.uniform(0.2, 0.3)
    face = (((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0).astype(np.float64)
    canvas += gaussian_filter(face, 2.0)[..., None] * rng.uniform(0.08, 0.15)

    texture = gaussian_filter(rng.standard_normal((ch, cw)), 1.0)
    canvas += (texture / texture.std() * NOISE_AMPLITUDE)[..., None]

    velocity = rng.integers(0, 2, size=2)
    drift = rng.uniform(-DRIFT, DRIFT)
    offsets = [(k * velocity[0], k * velocity[1]) for k in range(t)]
    return canvas, offsets, drift


def gen_real(cfg, rng):
    canvas, offsets, drift = _scene(cfg, rng)
    h, w = cfg.height, cfg.width
    frames = [canvas[oy:oy + h, ox:ox + w] + k * drift for k, (oy, ox) in enumerate(offsets)]
    return np.clip(np.stack(frames), 0.0, 1.0)


def _regions(cfg, rng):
    h, w = cfg.height, cfg.width
    rh = int(rng.integers(h // 3, h // 2 + 1))
    rw = int(rng.integers(w // 3, w // 2 + 1))
    top = (h - rh) // 2 + int(rng.integers(-h // 8, h // 8 + 1))
    left = (w - rw) // 2 + int(rng.integers(-w // 8, w // 8 + 1))
    regions = []
    for _ in range(cfg.frames):
        jy, jx = rng.integers(-1, 2, size=2)
        y = int(np.clip(top + jy, 0, h - rh))
        x = int(np.clip(left + jx, 0, w - rw))
        regions.append([y, x, rh, rw])
    return regions


def _forge(family, frame, k, cfg, extras):
    if family == 'splice':
        return extras['source'][k]
    if family == 'smooth':
        return gaussian_filter(frame, sigma=(2.5, 2.5, 0))
    if family == 'recompress':
        q = QuantSpec(RECOMPRESS_QUALITY)
        return np.stack([roundtrip(frame[:, :, c], q) for c in range(frame.shape[2])], axis=-1)
    if family == 'texture_swap':
        tex = extras['texture'][k:k + cfg.height, k:k + cfg.width]
        return gaussian_filter(frame, sigma=(3.0, 3.0, 0)) + tex[..., None]
    raise ValueError('unknown forgery family %r' % family)


def gen_fake(cfg, rng, family):
    """Tampered frames and the per-frame [top, left, height, width] regions."""
    if family not in FAMILIES:
        raise ValueError('unknown forgery family %r' % family)
    frames = gen_real(cfg, rng)
    regions = _regions(cfg, rng)

    extras = {}
    if family == 'splice':
        other = gen_real(cfg, rng)
        gain = rng.uniform(1.25, 1.5)
        cast = rng.uniform(-0.05, 0.05, size=3)
        extras['source'] = np.clip(other * gain + 0.08 + cast, 0.0, 1.0)
    elif family == 'texture_swap':
        noise = gaussian_filter(rng.standard_normal((cfg.height + cfg.frames, cfg.width + cfg.frames)), (0.3, 3.0))
        extras['texture'] = noise / noise.std() * NOISE_AMPLITUDE * 1.5

    out = frames.copy()
    for k, (y, x, rh, rw) in enumerate(regions):
        forged = _forge(family, frames[k], k, cfg, extras)
        window = (slice(y, y + rh), slice(x, x + rw))
        out[k][window] = (1.0 - cfg.severity) * frames[k][window] + cfg.severity * forged[window]
    return np.clip(out, 0.0, 1.0), regions


def gen_landmarks(cfg, rng, label):
    """T x 2K points on an ellipse, normalized to [0, 1]; fakes wobble more."""
    k = cfg.landmarks
    angles = 2 * np.pi * np.arange(k) / k
    center = 0.5 + rng.uniform(-0.02, 0.02, size=2)
    points = np.stack([center[1] + 0.25 * np.cos(angles), center[0] + 0.3 * np.sin(angles)], axis=1)
    wobble = 0.01 if label == 1 else 0.002
    rows = [np.clip(points + rng.normal(0.0, wobble, size=points.shape), 0.0, 1.0).reshape(-1)
            for _ in range(cfg.frames)]
    return np.stack(rows)


def assign_families(cfg):
    """Family of every fake video, allocated by largest remainder and shuffled by seed."""
    n_fake = cfg.n_videos // 2
    shares = [(f, p * n_fake) for f, p in cfg.forgery_mix]
    counts = {f: int(np.floor(s)) for f, s in shares}
    remainder = n_fake - sum(counts.values())
    for f, s in sorted(shares, key=lambda fs: (-(fs[1] - np.floor(fs[1])), FAMILIES.index(fs[0])))[:remainder]:
        counts[f] += 1
    families = [f for f in FAMILIES for _ in range(counts.get(f, 0))]
    order = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(cfg.n_videos,))).permutation(n_fake)
    return [families[i] for i in order]


def render_video(cfg, index, family):
    rng = video_rng(cfg, index)
    if family is None:
        return gen_real(cfg, rng), None, (gen_landmarks(cfg, rng, 0) if cfg.landmarks else None)
    frames, regions = gen_fake(cfg, rng, family)
    return frames, regions, (gen_landmarks(cfg, rng, 1) if cfg.landmarks else None)


class VideoDataset(Dataset):
    """Rendered frames of every video, fake iff the index is odd."""

    def __init__(self, cfg):
        self.cfg = cfg
        families = iter(assign_families(cfg))
        self.families = [next(families) if i % 2 else None for i in range(cfg.n_videos)]

    def __len__(self):
        return self.cfg.n_videos

    def __getitem__(self, i):
        frames, regions, landmarks = render_video(self.cfg, i, self.families[i])
        return i, self.families[i], frames, regions, landmarks


def _identity(item):
    return item


def _render_into(cfg, root, workers, use_tqdm):
    loader = DataLoader(VideoDataset(cfg), batch_size=None, num_workers=workers, collate_fn=_identity)
    iterator = tqdm(loader, desc='[gen]', total=len(loader)) if use_tqdm else loader

    os.makedirs(os.path.join(root, 'frames'))
    records = []
    for i, family, frames, regions, landmarks in iterator:
        video_id = 'vid%04i' % i
        os.makedirs(os.path.join(root, 'frames', video_id))
        frame_paths = []
        for k, frame in enumerate(frames):
            rel = os.path.join('frames', video_id, '%03i.ppm' % k)
            write_pnm(frame, os.path.join(root, rel))
            frame_paths.append(rel)

        landmarks_path = None
        if landmarks is not None:
            if not os.path.isdir(os.path.join(root, 'landmarks')):
                os.makedirs(os.path.join(root, 'landmarks'))
            landmarks_path = os.path.join('landmarks', '%s.csv' % video_id)
            write_landmarks(landmarks, os.path.join(root, landmarks_path))

        records.append(VideoRecord(video_id=video_id, label=i % 2, family=family, frame_paths=frame_paths,
                                   landmarks_path=landmarks_path, regions=regions))
        log.debug('rendered %s (%s)', video_id, family or 'real')
    write_manifest(records, os.path.join(root, MANIFEST_NAME))
    return records


def _remove(path):
    if os.path.isdir(path):
        shutil.rmtree(path)
    elif os.path.exists(path):
        os.remove(path)


def gen_dataset(cfg, out_dir, workers=0, use_tqdm=False):
    """Write frames, landmark files and manifest.jsonl under `out_dir`; returns the records.

    Video i is fake iff i is odd, which gives floor(n/2) fakes. Rendering may
    run on `workers` processes; files are written here, in index order.

    Everything is rendered into a staging directory inside `out_dir` first.
    Only a complete run touches the previous dataset: its manifest goes
    first, the owned trees (frames/, landmarks/) are swapped in whole and the
    new manifest lands last. A failed run leaves `out_dir` as it was.
    """
    fresh = not os.path.isdir(out_dir)
    if fresh:
        os.makedirs(out_dir)
    staging = tempfile.mkdtemp(prefix='.gen-', dir=out_dir)
    try:
        records = _render_into(cfg, staging, workers, use_tqdm)
    except BaseException:
        log.error('dataset generation failed, discarding staged outputs in %s', staging)
        shutil.rmtree(staging, ignore_errors=True)
        if fresh:
            shutil.rmtree(out_dir, ignore_errors=True)
        raise

    _remove(os.path.join(out_dir, MANIFEST_NAME))
    for name in OWNED_TREES:
        _remove(os.path.join(out_dir, name))
        if os.path.isdir(os.path.join(staging, name)):
            os.replace(os.path.join(staging, name), os.path.join(out_dir, name))
    os.replace(os.path.join(staging, MANIFEST_NAME), os.path.join(out_dir, MANIFEST_NAME))
    os.rmdir(staging)
    log.info('wrote %i videos x %i frames to %s', cfg.n_videos, cfg.frames, out_dir)
    return records
