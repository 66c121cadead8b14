"""Manifests, feature CSVs and frame sequences.

The manifest is JSON Lines, one video per line, with paths relative to the
manifest's directory. Feature CSVs hold one row per frame: video_id,
frame_index, label, then the Text, Comr, Hifr, Lico and Moop vectors.
"""

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

from sfenet.imagecore import read_pnm
from sfenet.pooling import STREAMS, FeatureBundle, extract_bundle
from sfenet.sfenet import FrameSequence


log = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
ID_COLUMNS = ['video_id', 'frame_index', 'label']


@dataclass
class VideoRecord:
    video_id: str
    label: int
    family: Optional[str]
    frame_paths: List[str]
    landmarks_path: Optional[str] = None
    mask_paths: Optional[List[str]] = None
    regions: Optional[List[List[int]]] = None

    def to_json(self):
        d = {'video_id': self.video_id, 'label': self.label, 'family': self.family,
             'frame_paths': list(self.frame_paths), 'landmarks_path': self.landmarks_path}
        if self.mask_paths is not None:
            d['mask_paths'] = list(self.mask_paths)
        d['regions'] = [list(r) for r in self.regions] if self.regions is not None else None
        return d

    @classmethod
    def from_json(cls, d):
        missing = [k for k in ('video_id', 'label', 'frame_paths') if k not in d]
        if missing:
            raise ValueError('manifest record lacks %s' % ', '.join(missing))
        if d['label'] not in (0, 1):
            raise ValueError('video %s has label %r, expected 0 or 1' % (d['video_id'], d['label']))
        if not d['frame_paths']:
            raise ValueError('video %s lists no frames' % d['video_id'])
        return cls(video_id=str(d['video_id']), label=int(d['label']), family=d.get('family'),
                   frame_paths=list(d['frame_paths']), landmarks_path=d.get('landmarks_path'),
                   mask_paths=d.get('mask_paths'), regions=d.get('regions'))


def read_manifest(path):
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                records.append(VideoRecord.from_json(json.loads(line)))
            except json.JSONDecodeError as e:
                raise ValueError('%s:%i: bad JSON: %s' % (path, lineno, e))
    ids = [r.video_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError('duplicate video ids in %s' % path)
    return records


def write_manifest(records, path):
    with open(path, 'w') as f:
        for r in records:
            f.write(json.dumps(r.to_json(), sort_keys=True) + '\n')


def resolve(manifest_path, rel):
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), rel)


def missing_frames(records, manifest_path):
    return [(r.video_id, p) for r in records for p in r.frame_paths
            if not os.path.isfile(resolve(manifest_path, p))]


def read_landmarks(path):
    return pd.read_csv(path, float_precision='round_trip').to_numpy(dtype=np.float64)


def write_landmarks(points, path):
    points = np.asarray(points, dtype=np.float64)
    k = points.shape[1] // 2
    columns = ['%s%i' % (axis, i) for i in range(k) for axis in ('x', 'y')]
    pd.DataFrame(points, columns=columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def feature_columns(dims):
    return [('%s_%i' % (s, i)) for s in STREAMS for i in range(dims[s])]


def stream_dims_from_columns(columns):
    dims = {s: sum(1 for c in columns if c.rsplit('_', 1)[0] == s) for s in STREAMS}
    missing = [s for s in STREAMS if dims[s] == 0]
    if missing:
        raise ValueError('feature table lacks streams %s' % ', '.join(missing))
    return dims


class FrameDataset(Dataset):
    """Every frame of a manifest, in manifest order, mapped to its feature bundle."""

    def __init__(self, records, manifest_path, cfg):
        self.cfg = cfg
        self.items = [(r.video_id, t, r.label, resolve(manifest_path, p))
                      for r in records for t, p in enumerate(r.frame_paths)]

    def __len__(self):
        return len(self.items)

    def __getitem__(self, idx):
        video_id, t, label, path = self.items[idx]
        return video_id, t, label, extract_bundle(read_pnm(path), self.cfg)


def _identity(item):
    return item


def extract_features(records, manifest_path, cfg, workers=0, use_tqdm=False):
    """Feature table for every frame; row order follows the manifest whatever the worker count."""
    missing = missing_frames(records, manifest_path)
    if missing:
        listing = ', '.join('%s:%s' % m for m in missing[:20])
        raise FileNotFoundError('%i missing frame(s): %s' % (len(missing), listing))

    loader = DataLoader(FrameDataset(records, manifest_path, cfg), batch_size=None,
                        num_workers=workers, collate_fn=_identity)
    iterator = tqdm(loader, desc='[extract]', total=len(loader)) if use_tqdm else loader

    rows = []
    columns = None
    for video_id, t, label, bundle in iterator:
        if columns is None:
            columns = ID_COLUMNS + feature_columns({s: len(bundle[s]) for s in STREAMS})
        rows.append([video_id, t, label] + bundle.concatenated().tolist())
    log.info('extracted %i frames from %i videos', len(rows), len(records))
    return pd.DataFrame(rows, columns=columns)


def write_features(df, path):
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_features(path):
    df = pd.read_csv(path, dtype={'video_id': str}, float_precision='round_trip')
    missing = [c for c in ID_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError('%s lacks columns %s' % (path, ', '.join(missing)))
    # all-integer columns come back as int64
    values = [c for c in df.columns if c not in ID_COLUMNS]
    df[values] = df[values].astype(np.float64)
    return df


def sequences_from_features(df, records=None, manifest_path=None, use_landmarks=False):
    """FrameSequences in manifest order (table order without one), frames sorted by index."""
    dims = stream_dims_from_columns(df.columns)
    config_hash = 'csv:' + '-'.join('%s%i' % (s, dims[s]) for s in STREAMS)
    by_id = {r.video_id: r for r in records} if records is not None else {}
    stream_cols = {s: ['%s_%i' % (s, i) for i in range(dims[s])] for s in STREAMS}

    sequences = []
    for video_id, group in df.groupby('video_id', sort=False):
        group = group.sort_values('frame_index')
        labels = set(group['label'].tolist())
        if len(labels) != 1:
            raise ValueError('video %s mixes labels %r' % (video_id, sorted(labels)))
        mats = {s: group[stream_cols[s]].to_numpy(dtype=np.float64) for s in STREAMS}
        bundles = [FeatureBundle(vectors={s: mats[s][k] for s in STREAMS}, config_hash=config_hash)
                   for k in range(len(group))]

        record = by_id.get(video_id)
        landmarks = None
        if use_landmarks:
            if record is None or record.landmarks_path is None:
                raise ValueError('video %s has no landmarks file' % video_id)
            landmarks = read_landmarks(resolve(manifest_path, record.landmarks_path))
            if len(landmarks) != len(bundles):
                raise ValueError('video %s has %i landmark rows for %i frames'
                                 % (video_id, len(landmarks), len(bundles)))
        sequences.append(FrameSequence(video_id=str(video_id), bundles=bundles, label=int(labels.pop()),
                                       landmarks=landmarks, family=record.family if record else None))

    if records is not None:
        order = {r.video_id: i for i, r in enumerate(records)}
        sequences.sort(key=lambda s: order.get(s.video_id, len(order)))
    if use_landmarks and len({s.landmarks.shape[1] for s in sequences}) > 1:
        raise ValueError('landmark vectors differ in length across videos')
    return sequences


def split_sequences(sequences, holdout, seed):
    """Stratified video-level split; returns (train, test) in input order."""
    if not 0.0 <= holdout < 1.0:
        raise ValueError('holdout fraction must be in [0, 1), got %r' % holdout)
    rng = np.random.default_rng(seed)
    held = set()
    for label in (0, 1):
        idx = [i for i, s in enumerate(sequences) if s.label == label]
        n_hold = min(int(math.ceil(holdout * len(idx) - 1e-9)), max(len(idx) - 1, 0))
        held.update(int(i) for i in rng.permutation(idx)[:n_hold])
    train = [s for i, s in enumerate(sequences) if i not in held]
    test = [s for i, s in enumerate(sequences) if i in held]
    return train, test