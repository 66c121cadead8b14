import os
from collections import Counter

import numpy as np
import pytest
from scipy.ndimage import laplace

from sfenet import synthgen
from sfenet.compression import QuantSpec, roundtrip
from sfenet.data import read_landmarks, read_manifest, resolve
from sfenet.imagecore import read_pnm
from sfenet.pooling import STREAMS, FeatureConfig, extract_bundle
from sfenet.synthgen import (FAMILIES, RECOMPRESS_QUALITY, GenConfig, assign_families, gen_dataset, gen_fake,
                             gen_real, parse_mix, render_video, video_rng)


np.random.seed(666)

SMALL = GenConfig(n_videos=10, frames=4, height=32, width=32)


def region_mask(shape, region):
    y, x, rh, rw = region
    mask = np.zeros(shape[:2], dtype=bool)
    mask[y:y + rh, x:x + rw] = True
    return mask


def assert_same_tree(a, b):
    names_a = sorted(os.path.relpath(os.path.join(d, f), a) for d, _, fs in os.walk(a) for f in fs)
    names_b = sorted(os.path.relpath(os.path.join(d, f), b) for d, _, fs in os.walk(b) for f in fs)
    assert names_a == names_b
    for name in names_a:
        with open(os.path.join(a, name), 'rb') as fa, open(os.path.join(b, name), 'rb') as fb:
            assert fa.read() == fb.read(), name


def test_config_validation():
    for kwargs in (dict(n_videos=0), dict(frames=1), dict(height=8), dict(severity=0.0), dict(severity=1.5),
                   dict(landmarks=-1), dict(forgery_mix=(('warp', 1.0),)),
                   dict(forgery_mix=(('splice', 0.5), ('smooth', 0.2)))):
        with pytest.raises(ValueError):
            GenConfig(**kwargs)


def test_parse_mix():
    assert parse_mix('smooth') == (('smooth', 1.0),)
    assert parse_mix('splice=0.5, smooth=0.5') == (('splice', 0.5), ('smooth', 0.5))
    with pytest.raises(ValueError):
        parse_mix('splice=lots')
    with pytest.raises(ValueError):
        GenConfig(forgery_mix=parse_mix('morph'))


def test_rendering_is_deterministic():
    for index, family in ((0, None), (3, 'splice'), (5, 'texture_swap')):
        a = render_video(SMALL, index, family)
        b = render_video(SMALL, index, family)
        assert np.array_equal(a[0], b[0])
        assert a[1] == b[1]
    assert not np.array_equal(render_video(SMALL, 0, None)[0], render_video(SMALL, 2, None)[0])


def test_real_frames_are_coherent():
    for index in range(0, 10, 2):
        frames = gen_real(SMALL, video_rng(SMALL, index))
        assert frames.shape == (4, 32, 32, 3)
        assert frames.min() >= 0.0 and frames.max() <= 1.0
        for a, b in zip(frames, frames[1:]):
            assert np.mean(np.abs(a - b)) < 0.05


def test_forgery_stays_inside_region():
    for family in FAMILIES:
        base = gen_real(SMALL, video_rng(SMALL, 1))
        frames, regions = gen_fake(SMALL, video_rng(SMALL, 1), family)
        assert len(regions) == SMALL.frames
        for k, region in enumerate(regions):
            mask = region_mask(frames[k].shape, region)
            assert np.array_equal(frames[k][~mask], base[k][~mask]), family
            assert np.mean(np.abs(frames[k][mask] - base[k][mask])) > 1e-3, family


def test_smooth_removes_high_frequencies():
    base = gen_real(SMALL, video_rng(SMALL, 1))
    frames, regions = gen_fake(SMALL, video_rng(SMALL, 1), 'smooth')
    for k, (y, x, rh, rw) in enumerate(regions):
        inner = (slice(y + 2, y + rh - 2), slice(x + 2, x + rw - 2))
        fake_energy = np.var(laplace(frames[k][:, :, 0])[inner])
        real_energy = np.var(laplace(base[k][:, :, 0])[inner])
        assert fake_energy < 0.5 * real_energy


def test_recompress_blends_block_round_trip():
    cfg = GenConfig(n_videos=2, frames=2, height=32, width=32, severity=0.6)
    base = gen_real(cfg, video_rng(cfg, 1))
    frames, regions = gen_fake(cfg, video_rng(cfg, 1), 'recompress')
    q = QuantSpec(RECOMPRESS_QUALITY)
    for k, (y, x, rh, rw) in enumerate(regions):
        rt = np.stack([roundtrip(base[k][:, :, c], q) for c in range(3)], axis=-1)
        window = (slice(y, y + rh), slice(x, x + rw))
        expected = np.clip(0.4 * base[k][window] + 0.6 * rt[window], 0, 1)
        assert np.allclose(frames[k][window], expected, atol=1e-12)


def test_low_severity_approaches_real():
    for family in FAMILIES:
        cfg = GenConfig(n_videos=2, frames=2, height=32, width=32, severity=1e-6)
        base = gen_real(cfg, video_rng(cfg, 1))
        frames, _ = gen_fake(cfg, video_rng(cfg, 1), family)
        assert np.max(np.abs(frames - base)) <= 2e-6


def test_unknown_family():
    with pytest.raises(ValueError):
        gen_fake(SMALL, video_rng(SMALL, 1), 'warp')


def test_assign_families():
    families = assign_families(SMALL)
    assert len(families) == 5
    assert Counter(families) == {'splice': 2, 'smooth': 1, 'recompress': 1, 'texture_swap': 1}
    assert families == assign_families(SMALL)

    only = GenConfig(n_videos=7, forgery_mix=parse_mix('smooth'))
    assert assign_families(only) == ['smooth'] * 3


def test_gen_dataset(tmp_path):
    out = str(tmp_path / 'ds')
    records = gen_dataset(SMALL, out)
    assert len(records) == 10
    assert sum(r.label for r in records) == 5
    assert [r.video_id for r in records] == ['vid%04i' % i for i in range(10)]

    manifest = os.path.join(out, 'manifest.jsonl')
    assert [r.to_json() for r in read_manifest(manifest)] == [r.to_json() for r in records]
    n_frames = 0
    for r in records:
        assert len(r.frame_paths) == 4
        for p in r.frame_paths:
            assert read_pnm(resolve(manifest, p)).shape == (32, 32, 3)
            n_frames += 1
        if r.label:
            assert r.family in FAMILIES and len(r.regions) == 4
        else:
            assert r.family is None and r.regions is None
        assert r.landmarks_path is None
    assert n_frames == 40


def test_regeneration_is_byte_identical(tmp_path):
    gen_dataset(SMALL, str(tmp_path / 'a'))
    gen_dataset(SMALL, str(tmp_path / 'b'))
    assert_same_tree(str(tmp_path / 'a'), str(tmp_path / 'b'))


def test_worker_count_does_not_change_output(tmp_path):
    cfg = GenConfig(n_videos=4, frames=2, height=16, width=16)
    gen_dataset(cfg, str(tmp_path / 'serial'))
    gen_dataset(cfg, str(tmp_path / 'parallel'), workers=2)
    assert_same_tree(str(tmp_path / 'serial'), str(tmp_path / 'parallel'))


def test_landmarks(tmp_path):
    cfg = GenConfig(n_videos=4, frames=3, height=16, width=16, landmarks=5)
    records = gen_dataset(cfg, str(tmp_path / 'ds'))
    manifest = str(tmp_path / 'ds' / 'manifest.jsonl')
    for r in records:
        points = read_landmarks(resolve(manifest, r.landmarks_path))
        assert points.shape == (3, 10)
        assert points.min() >= 0.0 and points.max() <= 1.0


def test_failure_removes_partial_outputs(tmp_path, monkeypatch):
    def broken(records, path):
        raise OSError('disk full')

    monkeypatch.setattr(synthgen, 'write_manifest', broken)
    out = tmp_path / 'ds'
    with pytest.raises(OSError):
        gen_dataset(SMALL, str(out))
    assert not out.exists()

    out.mkdir()
    (out / 'keep.txt').write_text('mine')
    with pytest.raises(OSError):
        gen_dataset(SMALL, str(out))
    assert sorted(os.listdir(str(out))) == ['keep.txt']


def test_failed_rerun_keeps_previous_dataset(tmp_path, monkeypatch):
    cfg = GenConfig(n_videos=4, frames=2, height=32, width=32)
    out, ref = str(tmp_path / 'ds'), str(tmp_path / 'ref')
    gen_dataset(cfg, out)
    gen_dataset(cfg, ref)

    calls = []
    write_pnm = synthgen.write_pnm

    def flaky(img, path):
        calls.append(path)
        if len(calls) == 3:
            raise OSError('disk full')
        write_pnm(img, path)

    monkeypatch.setattr(synthgen, 'write_pnm', flaky)
    with pytest.raises(OSError):
        gen_dataset(GenConfig(n_videos=6, frames=2, height=32, width=32, seed=8), out)
    assert_same_tree(out, ref)
    manifest = os.path.join(out, 'manifest.jsonl')
    assert not [p for r in read_manifest(manifest) for p in r.frame_paths if not os.path.isfile(resolve(manifest, p))]


def test_rerun_with_fewer_videos_drops_stale_frames(tmp_path):
    out, ref = str(tmp_path / 'ds'), str(tmp_path / 'ref')
    gen_dataset(GenConfig(n_videos=6, frames=2, height=32, width=32, landmarks=4), out)
    small = GenConfig(n_videos=2, frames=2, height=32, width=32)
    gen_dataset(small, out)
    gen_dataset(small, ref)
    assert_same_tree(out, ref)
    assert sorted(os.listdir(out)) == ['frames', 'manifest.jsonl']


@pytest.mark.slow
def test_full_severity_is_separable():
    cfg = GenConfig(n_videos=100, frames=2, severity=1.0)
    features = FeatureConfig()
    dataset = synthgen.VideoDataset(cfg)
    pooled = {s: [] for s in STREAMS}
    labels = []
    for i in range(cfg.n_videos):
        _, _, frames, _, _ = dataset[i]
        bundles = [extract_bundle(f, features) for f in frames]
        for s in STREAMS:
            pooled[s].append(np.mean([b[s] for b in bundles], axis=0))
        labels.append(i % 2)
    labels = np.array(labels)

    gaps = {}
    for s in STREAMS:
        x = np.array(pooled[s])
        real, fake = x[labels == 0], x[labels == 1]
        within = np.sqrt((real.var(axis=0, ddof=1) * (len(real) - 1) + fake.var(axis=0, ddof=1) * (len(fake) - 1))
                         / (len(x) - 2))
        gap = np.abs(fake.mean(axis=0) - real.mean(axis=0))
        gaps[s] = np.max(gap / np.maximum(within, 1e-12))
    assert max(gaps.values()) > 1.0, gaps
