import logging

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from sfenet.metrics import ScoredSample, auc
from sfenet.pooling import STREAMS
from sfenet.sfenet import SFENet, batch_loss, collate


log = logging.getLogger(__name__)


def count_params(model):
    return sum(dict((p.data_ptr(), p.numel()) for p in model.parameters()).values())


def ablation_variants(streams=STREAMS):
    """Full gated model, the ungated baseline, then one model per stream."""
    variants = [{'name': 'sfenet', 'streams': tuple(streams), 'gate_mode': 'learned'},
                {'name': 'ungated', 'streams': tuple(streams), 'gate_mode': 'uniform'}]
    variants += [{'name': s, 'streams': (s,), 'gate_mode': 'learned'} for s in streams]
    return variants


def fit_standardizers(model, sequences):
    for s in model.streams:
        model.norms[s].fit(np.concatenate([seq.stream_matrix(s) for seq in sequences]))


def init_model(sequences, cfg, streams=STREAMS, gate_mode='learned', use_landmarks=False):
    dims = {s: len(sequences[0].bundles[0][s]) for s in streams}
    landmark_dim = 0
    if use_landmarks:
        if any(seq.landmarks is None for seq in sequences):
            raise ValueError('landmarks requested but some sequences have none')
        landmark_dim = sequences[0].landmarks.shape[1]
    model = SFENet(dims, hidden=cfg.hidden, landmark_dim=landmark_dim, streams=streams, gate_mode=gate_mode)
    model.reset_parameters(cfg.init_scale, torch.Generator().manual_seed(cfg.seed))
    fit_standardizers(model, sequences)
    return model


def train(sequences, cfg, streams=STREAMS, gate_mode='learned', use_landmarks=False, use_tqdm=False,
          name='sfenet', callback=None):
    """Full-batch SGD with momentum; returns the model and the loss before every step."""
    labels = {seq.label for seq in sequences}
    if labels != {0, 1}:
        raise ValueError('training needs both real and fake videos, got labels %r' % sorted(labels))

    model = init_model(sequences, cfg, streams, gate_mode, use_landmarks)
    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)
    batches = collate(sequences, model.streams)
    log.info('[%s] %i sequences, %i parameters, %i epochs', name, len(sequences), count_params(model), cfg.epochs)

    losses = []
    iterator = range(cfg.epochs)
    if use_tqdm:
        iterator = tqdm(iterator, desc='[train] %s' % name)
    report_every = max(cfg.epochs // 10, 1)

    model.train()
    for epoch in iterator:
        optimizer.zero_grad()
        total = batch_loss(model, batches)
        total.backward()
        optimizer.step()

        losses.append(total.item())
        if not np.isfinite(losses[-1]):
            raise ValueError('training diverged at epoch %i; lower the learning rate' % epoch)
        if epoch % report_every == 0 or epoch == cfg.epochs - 1:
            log.info('[%s] epoch %i training loss: %f', name, epoch, losses[-1])
        if callback is not None:
            callback(epoch, model, losses[-1])
    model.eval()
    return model, losses


@torch.no_grad()
def score_sequences(model, sequences):
    """Frame-level samples (one per prefix) and the final gate weights of every sequence."""
    samples = []
    gate_rows = []
    for batch in collate(sequences, model.streams):
        out = model(batch.inputs, batch.landmarks)
        for n, seq in enumerate(batch.sequences):
            for t in range(len(seq)):
                samples.append(ScoredSample(id='%s/%03i' % (seq.video_id, t), score=out.frame_scores[n, t].item(),
                                            label=seq.label, video_id=seq.video_id, family=seq.family))
            family = 'real' if seq.label == 0 else seq.family or 'fake'
            row = {'video_id': seq.video_id, 'label': seq.label, 'family': family}
            row.update({s: out.gates[n, k].item() for k, s in enumerate(model.streams)})
            gate_rows.append(row)
    return samples, pd.DataFrame(gate_rows, columns=['video_id', 'label', 'family'] + list(model.streams))


def gate_summary(gates):
    """Mean gate weight per stream for each family, real videos included."""
    streams = [c for c in gates.columns if c in STREAMS]
    return gates.groupby('family', sort=True)[streams].mean().reset_index()


def compare(variants, train_seqs, test_seqs, cfg, use_landmarks=False, use_tqdm=False, eval_every=None):
    """Train every variant dict on the same split.

    Each dict gets 'model', 'train_history' (loss per epoch), 'test_history'
    (held-out frame AUC every `eval_every` epochs) and 'auc' (final).
    """
    for variant in variants:
        variant['train_history'] = []
        variant['test_history'] = []

    try:
        for variant in variants:
            def on_epoch(epoch, model, _, variant=variant):
                if eval_every and (epoch + 1) % eval_every == 0:
                    model.eval()
                    variant['test_history'].append(auc(score_sequences(model, test_seqs)[0]))
                    model.train()

            model, losses = train(train_seqs, cfg, streams=variant['streams'], gate_mode=variant['gate_mode'],
                                  use_landmarks=use_landmarks, use_tqdm=use_tqdm, name=variant['name'],
                                  callback=on_epoch)
            variant['model'] = model
            variant['train_history'] = losses
            variant['auc'] = auc(score_sequences(model, test_seqs)[0])
            log.info('[%s] held-out frame AUC: %f', variant['name'], variant['auc'])
    except KeyboardInterrupt:
        log.warning('early exit keyboard interrupt')
    return variants
