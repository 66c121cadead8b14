"""Command line: gen -> extract -> train -> eval, plus ablate.

Exit codes: 0 ok, 1 I/O error, 2 configuration or validation error.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from sfenet.data import (FLOAT_FORMAT, extract_features, read_features, read_manifest, resolve,
                         sequences_from_features, split_sequences, write_features)
from sfenet.imagecore import read_pnm, write_pnm
from sfenet.metrics import evaluate
from sfenet.pooling import STREAMS, FeatureConfig, extract_maps
from sfenet.sfenet import GATE_MODES, TrainConfig, load_checkpoint, save_checkpoint
from sfenet.synthgen import UNIFORM_MIX, GenConfig, gen_dataset, parse_mix
from sfenet.texture import lbp
from sfenet.utils.training import ablation_variants, compare, gate_summary, score_sequences, train


log = logging.getLogger(__name__)

CONFIG_EXCLUDED = ('config', 'command', 'func', 'verbose', 'quiet')


def _streams(text):
    streams = tuple(s.strip() for s in text.split(',') if s.strip())
    unknown = [s for s in streams if s not in STREAMS]
    if unknown or not streams:
        raise argparse.ArgumentTypeError('streams must be a comma-separated subset of %s' % ','.join(STREAMS))
    return streams


def _train_config(args):
    return TrainConfig(seed=args.seed, learning_rate=args.lr, momentum=args.momentum, epochs=args.epochs,
                       hidden=args.hidden, init_scale=args.init_scale)


def _load_sequences(args, use_landmarks):
    df = read_features(args.features)
    records = read_manifest(args.manifest) if args.manifest else None
    return sequences_from_features(df, records, args.manifest, use_landmarks=use_landmarks)


def _makedirs(path):
    if not os.path.isdir(path):
        os.makedirs(path)


def cmd_gen(args):
    mix = UNIFORM_MIX if args.families == 'uniform' else parse_mix(args.families)
    cfg = GenConfig(seed=args.seed, n_videos=args.videos, frames=args.frames, height=args.height,
                    width=args.width, forgery_mix=mix, severity=args.severity, landmarks=args.landmarks)
    gen_dataset(cfg, args.out, workers=args.workers, use_tqdm=not args.quiet)


def dump_maps(records, manifest_path, cfg, out_dir):
    """One PGM per map per frame, plus a panel figure of each video's first frame."""
    from sfenet.utils.visualize import plot_feature_maps

    for r in records:
        video_dir = os.path.join(out_dir, 'maps', r.video_id)
        _makedirs(video_dir)
        for t, rel in enumerate(r.frame_paths):
            img = read_pnm(resolve(manifest_path, rel))
            maps = extract_maps(img, cfg)
            maps['Text_lbp'] = lbp(img) / 255.0
            for name, m in maps.items():
                write_pnm(np.clip(m, 0.0, 1.0), os.path.join(video_dir, '%03i_%s.pgm' % (t, name)))
            if t == 0:
                plot_feature_maps(img, maps, os.path.join(video_dir, 'panel.png'), title=r.video_id)


def cmd_extract(args):
    cfg = FeatureConfig(grid=args.grid, quality=args.quality, hp_radius=args.hp_radius,
                        glcm_levels=args.glcm_levels)
    records = read_manifest(args.manifest)
    df = extract_features(records, args.manifest, cfg, workers=args.workers, use_tqdm=not args.quiet)
    _makedirs(args.out)
    write_features(df, os.path.join(args.out, 'features.csv'))
    if args.dump_maps:
        dump_maps(records, args.manifest, cfg, args.out)
    log.info('features %s written to %s', cfg.fingerprint(), args.out)


def cmd_train(args):
    sequences = _load_sequences(args, args.landmarks)
    train_seqs, test_seqs = split_sequences(sequences, args.holdout, args.seed)
    model, losses = train(train_seqs, _train_config(args), streams=args.streams, gate_mode=args.gate_mode,
                          use_landmarks=args.landmarks, use_tqdm=not args.quiet)

    _makedirs(args.out)
    save_checkpoint(model, os.path.join(args.out, 'checkpoint.txt'))
    pd.DataFrame({'epoch': np.arange(len(losses)), 'loss': losses}).to_csv(
        os.path.join(args.out, 'loss_trace.csv'), index=False, float_format=FLOAT_FORMAT)
    held = {s.video_id for s in test_seqs}
    pd.DataFrame({'video_id': [s.video_id for s in sequences],
                  'split': ['test' if s.video_id in held else 'train' for s in sequences]}).to_csv(
        os.path.join(args.out, 'split.csv'), index=False)
    log.info('trained on %i videos, %i held out', len(train_seqs), len(test_seqs))


def write_report(report, gates, out_dir, plot=False):
    _makedirs(out_dir)
    report.as_frame().to_csv(os.path.join(out_dir, 'report.csv'), index=False, float_format=FLOAT_FORMAT)
    report.roc_frame().to_csv(os.path.join(out_dir, 'roc.csv'), index=False, float_format=FLOAT_FORMAT)
    pd.DataFrame(sorted(report.family_auc.items()), columns=['family', 'auc']).to_csv(
        os.path.join(out_dir, 'family_auc.csv'), index=False, float_format=FLOAT_FORMAT)
    summary = gate_summary(gates)
    summary.to_csv(os.path.join(out_dir, 'gates.csv'), index=False, float_format=FLOAT_FORMAT)
    if plot:
        from sfenet.utils.visualize import plot_gates, plot_roc
        plot_roc(report, os.path.join(out_dir, 'roc.png'))
        plot_gates(summary, os.path.join(out_dir, 'gates.png'))


def cmd_eval(args):
    model = load_checkpoint(args.checkpoint)
    sequences = _load_sequences(args, model.landmark_dim > 0)
    if args.split:
        split = pd.read_csv(args.split, dtype={'video_id': str})
        held = set(split.loc[split['split'] == 'test', 'video_id'])
        sequences = [s for s in sequences if s.video_id in held]
    samples, gates = score_sequences(model, sequences)
    report = evaluate(samples)

    write_report(report, gates, args.out, plot=args.plot)
    pd.DataFrame([(s.id, s.video_id, s.label, s.family, s.score) for s in samples],
                 columns=['id', 'video_id', 'label', 'family', 'score']).to_csv(
        os.path.join(args.out, 'scores.csv'), index=False, float_format=FLOAT_FORMAT)
    print(report.table())


def cmd_ablate(args):
    sequences = _load_sequences(args, args.landmarks)
    train_seqs, test_seqs = split_sequences(sequences, args.holdout, args.seed)
    variants = compare(ablation_variants(args.streams), train_seqs, test_seqs, _train_config(args),
                       use_landmarks=args.landmarks, use_tqdm=not args.quiet)
    rows = [(v['name'], '+'.join(v['streams']), v['gate_mode'], v['auc']) for v in variants if 'auc' in v]
    table = pd.DataFrame(rows, columns=['variant', 'streams', 'gate_mode', 'frame_auc'])
    _makedirs(args.out)
    table.to_csv(os.path.join(args.out, 'ablation.csv'), index=False, float_format=FLOAT_FORMAT)
    print(table.to_string(index=False))


def _add_common(p):
    p.add_argument('--config', default=None, help='JSON file of flag defaults for this command')
    p.add_argument('--seed', type=int, default=7, help='seed for every random choice')
    p.add_argument('--verbose', action='store_true', help='log debug detail')
    p.add_argument('--quiet', action='store_true', help='only log warnings; no progress bars')


def _add_training(p):
    p.add_argument('--features', required=True, help='features.csv written by extract')
    p.add_argument('--manifest', default=None, help='manifest for families and landmark files')
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument('--holdout', type=float, default=0.3, help='fraction of videos per label held out')
    p.add_argument('--hidden', type=int, default=16, help='LSTM hidden size')
    p.add_argument('--lr', type=float, default=0.1, help='learning rate')
    p.add_argument('--momentum', type=float, default=0.9, help='SGD momentum')
    p.add_argument('--epochs', type=int, default=300, help='full-batch epochs')
    p.add_argument('--init-scale', type=float, default=0.1, help='uniform init range')
    p.add_argument('--streams', type=_streams, default=STREAMS, help='comma-separated feature streams')
    p.add_argument('--landmarks', action='store_true', help='feed landmark means to the classifier')


def build_parser():
    parser = argparse.ArgumentParser(prog='sfenet', description='Selective feature expression deepfake detector')
    subparsers = parser.add_subparsers(dest='command', required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = subparsers.add_parser('gen', help='generate a synthetic tampered-video dataset', formatter_class=fmt)
    _add_common(p)
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument('--videos', type=int, default=10, help='number of videos, every odd one fake')
    p.add_argument('--frames', type=int, default=4, help='frames per video')
    p.add_argument('--height', type=int, default=64, help='frame height')
    p.add_argument('--width', type=int, default=64, help='frame width')
    p.add_argument('--severity', type=float, default=0.8, help='forgery blend strength in (0, 1]')
    p.add_argument('--families', default='uniform', help="'uniform', one family, or 'splice=0.5,smooth=0.5'")
    p.add_argument('--landmarks', type=int, default=0, help='landmark points per frame (0: none)')
    p.add_argument('--workers', type=int, default=0, help='rendering worker processes')
    p.set_defaults(func=cmd_gen)

    p = subparsers.add_parser('extract', help='extract per-frame feature streams', formatter_class=fmt)
    _add_common(p)
    p.add_argument('--manifest', required=True, help='manifest.jsonl')
    p.add_argument('--out', required=True, help='output directory for features.csv')
    p.add_argument('--grid', type=int, default=4, help='pooling grid size')
    p.add_argument('--quality', type=int, default=50, help='recompression quality 1..100')
    p.add_argument('--hp-radius', type=int, default=None,
                   help='high-pass radius (None: min(H, W) // 8, negative: no filter)')
    p.add_argument('--glcm-levels', type=int, default=8, help='gray levels of the co-occurrence matrix')
    p.add_argument('--workers', type=int, default=0, help='extraction worker processes')
    p.add_argument('--dump-maps', action='store_true', help='also write every feature map as PGM')
    p.set_defaults(func=cmd_extract)

    p = subparsers.add_parser('train', help='train the gated network', formatter_class=fmt)
    _add_common(p)
    _add_training(p)
    p.add_argument('--gate-mode', choices=GATE_MODES, default='learned', help='learned softmax or fixed 1/S gates')
    p.set_defaults(func=cmd_train)

    p = subparsers.add_parser('eval', help='score features with a checkpoint', formatter_class=fmt)
    _add_common(p)
    p.add_argument('--checkpoint', required=True, help='checkpoint.txt written by train')
    p.add_argument('--features', required=True, help='features.csv written by extract')
    p.add_argument('--manifest', default=None, help='manifest for families and landmark files')
    p.add_argument('--split', default=None, help='split.csv from train; only its test videos are scored')
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument('--plot', action='store_true', help='also write roc.png and gates.png')
    p.set_defaults(func=cmd_eval)

    p = subparsers.add_parser('ablate', help='gated vs ungated vs single-stream models', formatter_class=fmt)
    _add_common(p)
    _add_training(p)
    p.set_defaults(func=cmd_ablate)

    return parser, subparsers.choices


def _config_value(action, key, value):
    """A config file value checked the way argparse checks the flag; ValueError on a mismatch."""
    def mismatch(expected):
        return ValueError('config key %s must be %s, got %r' % (key, expected, value))

    if action.nargs == 0:
        if not isinstance(value, bool):
            raise mismatch('true or false')
        return value
    if value is None and action.default is None:
        return value
    if action.type is _streams and isinstance(value, list):
        value = ','.join(str(v) for v in value)
    if isinstance(value, str) and action.type is not None:
        try:
            value = action.type(value)
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise ValueError('config key %s: %s' % (key, e))
    elif action.type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise mismatch('an integer')
    elif action.type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise mismatch('a number')
        value = float(value)
    elif action.type is None and not isinstance(value, str):
        raise mismatch('a string')
    if action.choices is not None and value not in action.choices:
        raise mismatch('one of %s' % ', '.join(action.choices))
    return value


def parse_args(argv=None):
    """Parse twice when --config is given: file values become defaults, explicit flags win."""
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as f:
            values = json.load(f)
        if not isinstance(values, dict):
            raise ValueError('config file must hold a JSON object')
        sub = commands[args.command]
        actions = {a.dest: a for a in sub._actions if a.dest not in CONFIG_EXCLUDED and a.dest != 'help'}
        values = {k.replace('-', '_'): v for k, v in values.items()}
        unknown = sorted(set(values) - set(actions))
        if unknown:
            raise ValueError('unknown keys in %s: %s' % (args.config, ', '.join(unknown)))
        values = {k: _config_value(actions[k], k, v) for k, v in values.items()}
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
    except ValueError as e:
        logging.basicConfig(level=logging.INFO)
        log.error('%s', e)
        return 2
    except OSError as e:
        logging.basicConfig(level=logging.INFO)
        log.error('%s', e)
        return 1

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        args.func(args)
    except ValueError as e:
        log.error('%s', e)
        return 2
    except OSError as e:
        log.error('%s', e)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
