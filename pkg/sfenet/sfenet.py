import json
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from sfenet.pooling import STREAMS


GATES = ('i', 'f', 'o', 'g')
GATE_MODES = ('learned', 'uniform')
EPS = 1e-12

CHECKPOINT_MAGIC = 'SFE-CKPT v1'


class CheckpointFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 7
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 300
    hidden: int = 16
    init_scale: float = 0.1

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError('learning rate must be non-negative, got %r' % self.learning_rate)
        if not 0 <= self.momentum < 1:
            raise ValueError('momentum must be in [0, 1), got %r' % self.momentum)
        if self.epochs < 0:
            raise ValueError('epochs must be non-negative, got %r' % self.epochs)
        if self.hidden < 1:
            raise ValueError('hidden size must be >= 1, got %r' % self.hidden)
        if self.init_scale < 0:
            raise ValueError('init scale must be non-negative, got %r' % self.init_scale)


@dataclass
class FrameSequence:
    video_id: str
    bundles: list
    label: int
    landmarks: Optional[np.ndarray] = None  # (T, 2K)
    family: Optional[str] = None

    def __post_init__(self):
        if len(self.bundles) < 1:
            raise ValueError('sequence %s has no frames' % self.video_id)
        if self.label not in (0, 1):
            raise ValueError('sequence %s has label %r, expected 0 or 1' % (self.video_id, self.label))
        hashes = {b.config_hash for b in self.bundles}
        if len(hashes) != 1:
            raise ValueError('sequence %s mixes feature configurations %r' % (self.video_id, sorted(hashes)))
        if self.landmarks is not None:
            self.landmarks = np.asarray(self.landmarks, dtype=np.float64).reshape(len(self.bundles), -1)

    def __len__(self):
        return len(self.bundles)

    def stream_matrix(self, stream):
        return np.stack([b[stream] for b in self.bundles])


@dataclass
class Batch:
    sequences: List[FrameSequence]
    inputs: Dict[str, torch.Tensor]  # stream -> (N, T, dim)
    landmarks: Optional[torch.Tensor]  # (N, T, 2K)
    labels: torch.Tensor  # (N,)


def collate(sequences, streams=STREAMS):
    """Stack sequences into batches of equal length, in first-seen length order."""
    groups = {}
    for seq in sequences:
        groups.setdefault(len(seq), []).append(seq)
    batches = []
    for group in groups.values():
        inputs = {s: torch.tensor(np.stack([seq.stream_matrix(s) for seq in group]), dtype=torch.float64)
                  for s in streams}
        landmarks = None
        if all(seq.landmarks is not None for seq in group):
            landmarks = torch.tensor(np.stack([seq.landmarks for seq in group]), dtype=torch.float64)
        labels = torch.tensor([float(seq.label) for seq in group], dtype=torch.float64)
        batches.append(Batch(sequences=group, inputs=inputs, landmarks=landmarks, labels=labels))
    return batches


class LSTMCell(nn.Module):
    def __init__(self, size):
        super(LSTMCell, self).__init__()
        assert size >= 1
        self.size = size
        for g in GATES:
            self.register_parameter('W_' + g, nn.Parameter(torch.zeros(size, size, dtype=torch.float64)))
            self.register_parameter('U_' + g, nn.Parameter(torch.zeros(size, size, dtype=torch.float64)))
            self.register_parameter('b_' + g, nn.Parameter(torch.zeros(size, dtype=torch.float64)))

    def extra_repr(self):
        return 'size=%i' % self.size


def lstm_step(x, h, c, cell):
    for name, t in (('x', x), ('h', h), ('c', c)):
        if t.shape[-1] != cell.size:
            raise ValueError('%s has width %i, cell expects %i' % (name, t.shape[-1], cell.size))

    def pre(g):
        return x @ getattr(cell, 'W_' + g).T + h @ getattr(cell, 'U_' + g).T + getattr(cell, 'b_' + g)

    i = torch.sigmoid(pre('i'))
    f = torch.sigmoid(pre('f'))
    o = torch.sigmoid(pre('o'))
    g = torch.tanh(pre('g'))
    c_next = f * c + i * g
    h_next = o * torch.tanh(c_next)
    return h_next, c_next


class SelectiveGate(nn.Module):
    """One logit per stream, a_k . h_k + b, softmaxed across streams."""

    def __init__(self, n_streams, hidden):
        super(SelectiveGate, self).__init__()
        self.a = nn.Parameter(torch.zeros(n_streams, hidden, dtype=torch.float64))
        self.bias = nn.Parameter(torch.zeros(1, dtype=torch.float64))

    def logits(self, summaries):
        if summaries.shape[-2:] != self.a.shape:
            raise ValueError('gate expects summaries of shape (..., %i, %i), got %r'
                             % (tuple(self.a.shape) + (tuple(summaries.shape),)))
        return (summaries * self.a).sum(-1) + self.bias

    def forward(self, summaries):
        return gate_weights(summaries, self)


def gate_weights(summaries, gate):
    return torch.softmax(gate.logits(summaries), dim=-1)


class Standardizer(nn.Module):
    def __init__(self, dim):
        super(Standardizer, self).__init__()
        self.register_buffer('mean', torch.zeros(dim, dtype=torch.float64))
        self.register_buffer('std', torch.ones(dim, dtype=torch.float64))

    @torch.no_grad()
    def fit(self, x):
        x = torch.as_tensor(x, dtype=torch.float64).reshape(-1, self.mean.shape[0])
        mean = x.mean(0)
        # population std, two passes
        std = ((x - mean) ** 2).mean(0).sqrt()
        self.mean.copy_(mean)
        self.std.copy_(torch.where(std < EPS, torch.ones_like(std), std))

    def forward(self, x):
        return (x - self.mean) / self.std


@dataclass
class SfeOutput:
    score: torch.Tensor  # (N,)
    frame_scores: torch.Tensor  # (N, T), score of each prefix
    gates: torch.Tensor  # (N, S) at the last frame
    frame_gates: torch.Tensor  # (N, T, S)
    hidden: Dict[str, torch.Tensor]  # stream -> (N, D) final summaries


class SFENet(nn.Module):
    def __init__(self, stream_dims, hidden=16, landmark_dim=0, streams=STREAMS, gate_mode='learned'):
        super(SFENet, self).__init__()
        streams = tuple(streams)
        if len(streams) == 0 or len(set(streams)) != len(streams) or not set(streams) <= set(STREAMS):
            raise ValueError('streams must be a non-empty subset of %r, got %r' % (STREAMS, streams))
        if gate_mode not in GATE_MODES:
            raise ValueError('gate mode must be one of %r, got %r' % (GATE_MODES, gate_mode))
        if hidden < 1 or landmark_dim < 0:
            raise ValueError('bad sizes: hidden=%r landmark_dim=%r' % (hidden, landmark_dim))

        self.streams = streams
        self.stream_dims = {s: int(stream_dims[s]) for s in streams}
        self.hidden = hidden
        self.landmark_dim = landmark_dim
        self.gate_mode = gate_mode

        self.norms = nn.ModuleDict({s: Standardizer(self.stream_dims[s]) for s in streams})
        self.projections = nn.ModuleDict({s: nn.Linear(self.stream_dims[s], hidden) for s in streams})
        self.cells = nn.ModuleDict({s: LSTMCell(hidden) for s in streams})
        self.gate = SelectiveGate(len(streams), hidden)
        self.fusion = nn.Linear(len(streams) * hidden + landmark_dim, hidden)
        self.classifier = nn.Linear(hidden, 1)
        self.double()
        self.zero_params()

    def config(self):
        return {'stream_dims': self.stream_dims, 'hidden': self.hidden, 'landmark_dim': self.landmark_dim,
                'streams': list(self.streams), 'gate_mode': self.gate_mode}

    @torch.no_grad()
    def zero_params(self):
        for p in self.parameters():
            p.zero_()

    @torch.no_grad()
    def reset_parameters(self, init_scale, generator=None):
        """Uniform(-init_scale, init_scale) everywhere, forget-gate bias shifted by +1."""
        for p in self.parameters():
            p.copy_(torch.rand(p.shape, generator=generator, dtype=torch.float64) * (2 * init_scale) - init_scale)
        for cell in self.cells.values():
            cell.b_f.add_(1.0)

    def _check_inputs(self, inputs):
        n, t = None, None
        for s in self.streams:
            if s not in inputs:
                raise ValueError('missing stream %s in inputs' % s)
            x = inputs[s]
            if x.dim() != 3 or x.shape[-1] != self.stream_dims[s]:
                raise ValueError('stream %s expects (N, T, %i) inputs, got %r'
                                 % (s, self.stream_dims[s], tuple(x.shape)))
            if n is None:
                n, t = x.shape[:2]
            elif x.shape[:2] != (n, t):
                raise ValueError('stream %s disagrees on (N, T)' % s)
        if t < 1:
            raise ValueError('sequences must have at least one frame')
        return n, t

    def forward(self, inputs, landmarks=None, gate_override=None):
        n, t = self._check_inputs(inputs)

        summaries = []
        for s in self.streams:
            z = self.projections[s](self.norms[s](inputs[s]))
            h = z.new_zeros(n, self.hidden)
            c = z.new_zeros(n, self.hidden)
            states = []
            for step in range(t):
                h, c = lstm_step(z[:, step], h, c, self.cells[s])
                states.append(h)
            summaries.append(torch.stack(states, 1))
        H = torch.stack(summaries, 2)  # (N, T, S, D)

        if gate_override is not None:
            gates = torch.as_tensor(gate_override, dtype=torch.float64).expand(n, t, len(self.streams))
        elif self.gate_mode == 'uniform':
            gates = H.new_full((n, t, len(self.streams)), 1.0 / len(self.streams))
        else:
            gates = self.gate(H)

        fused = (gates.unsqueeze(-1) * H).flatten(2)
        if self.landmark_dim:
            if landmarks is None:
                lm = fused.new_zeros(n, t, self.landmark_dim)
            else:
                if landmarks.shape != (n, t, self.landmark_dim):
                    raise ValueError('landmarks must have shape %r, got %r'
                                     % ((n, t, self.landmark_dim), tuple(landmarks.shape)))
                counts = torch.arange(1, t + 1, dtype=torch.float64).view(1, t, 1)
                lm = landmarks.cumsum(1) / counts
            fused = torch.cat([fused, lm], -1)

        logits = self.classifier(F.relu(self.fusion(fused))).squeeze(-1)
        frame_scores = torch.sigmoid(logits)
        return SfeOutput(score=frame_scores[:, -1], frame_scores=frame_scores, gates=gates[:, -1],
                         frame_gates=gates, hidden={s: H[:, -1, k] for k, s in enumerate(self.streams)})

    def extra_repr(self):
        return 'streams=%s, hidden=%i, landmark_dim=%i, gate_mode=%s' % (
            ','.join(self.streams), self.hidden, self.landmark_dim, self.gate_mode)


def loss(score, label):
    """Binary cross-entropy on a probability, clamped away from 0 and 1."""
    score = torch.clamp(torch.as_tensor(score, dtype=torch.float64), EPS, 1 - EPS)
    label = torch.as_tensor(label, dtype=torch.float64)
    return -(label * torch.log(score) + (1 - label) * torch.log(1 - score))


def batch_loss(model, batches, gate_override=None):
    """Mean loss over every sequence, accumulated in batch order."""
    total = None
    count = 0
    for batch in batches:
        out = model(batch.inputs, batch.landmarks, gate_override=gate_override)
        part = loss(out.score, batch.labels).sum()
        total = part if total is None else total + part
        count += len(batch.sequences)
    return total / count


def dumps_checkpoint(model):
    lines = [CHECKPOINT_MAGIC, 'config ' + json.dumps(model.config(), sort_keys=True)]
    for name, tensor in model.state_dict().items():
        shape = 'x'.join(str(d) for d in tensor.shape) or 'scalar'
        values = ' '.join('%.17g' % v for v in tensor.detach().reshape(-1).tolist())
        lines.append('%s %s %s' % (name, shape, values))
    return '\n'.join(lines) + '\n'


def loads_checkpoint(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise CheckpointFormatError('unknown checkpoint version %r' % (lines[0] if lines else ''))
    if len(lines) < 2 or not lines[1].startswith('config '):
        raise CheckpointFormatError('checkpoint is missing its config record')
    try:
        config = json.loads(lines[1][len('config '):])
        model = SFENet(**config)
    except (TypeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError('bad config record: %s' % e)

    expected = model.state_dict()
    loaded = {}
    for line in lines[2:]:
        if not line.strip():
            continue
        fields = line.split(' ')
        if len(fields) < 2:
            raise CheckpointFormatError('malformed tensor record %r' % line[:40])
        name, shape = fields[0], fields[1]
        if name not in expected:
            raise CheckpointFormatError('unknown tensor %s' % name)
        try:
            dims = () if shape == 'scalar' else tuple(int(d) for d in shape.split('x'))
        except ValueError:
            raise CheckpointFormatError('bad shape %r for %s' % (shape, name))
        if dims != tuple(expected[name].shape):
            raise CheckpointFormatError('shape mismatch for %s: file %r, model %r'
                                        % (name, dims, tuple(expected[name].shape)))
        try:
            values = [float(v) for v in fields[2:]]
        except ValueError as e:
            raise CheckpointFormatError('bad value in %s: %s' % (name, e))
        if len(values) != expected[name].numel():
            raise CheckpointFormatError('%s has %i values, expected %i' % (name, len(values), expected[name].numel()))
        loaded[name] = torch.tensor(values, dtype=torch.float64).reshape(dims)
    missing = sorted(set(expected) - set(loaded))
    if missing:
        raise CheckpointFormatError('checkpoint is missing tensors %s' % ', '.join(missing))
    model.load_state_dict(loaded)
    return model


def save_checkpoint(model, path):
    with open(path, 'w') as f:
        f.write(dumps_checkpoint(model))


def load_checkpoint(path):
    with open(path) as f:
        return loads_checkpoint(f.read())


def gradient_errors(model, batches, eps=1e-5, max_entries=None, generator=None, gate_override=None,
                    entrywise=False):
    """Per-tensor relative error between autograd and central finite differences.

    Error is ||a - n|| / max(||a|| + ||n||, 1e-6), or with `entrywise` the largest
    |a_i - n_i| / max(|a_i| + |n_i|, 1e-6). `max_entries` checks a random subset
    of each tensor's entries.
    """
    model.zero_grad()
    batch_loss(model, batches, gate_override).backward()

    errors = {}
    with torch.no_grad():
        for name, p in model.named_parameters():
            analytic = torch.zeros(p.numel(), dtype=torch.float64) if p.grad is None else p.grad.reshape(-1).clone()
            flat = p.data.view(-1)
            if max_entries is None or max_entries >= p.numel():
                idx = torch.arange(p.numel())
            else:
                idx = torch.randperm(p.numel(), generator=generator)[:max_entries].sort().values
            numeric = torch.zeros(len(idx), dtype=torch.float64)
            for k, i in enumerate(idx.tolist()):
                orig = flat[i].item()
                flat[i] = orig + eps
                plus = batch_loss(model, batches, gate_override).item()
                flat[i] = orig - eps
                minus = batch_loss(model, batches, gate_override).item()
                flat[i] = orig
                numeric[k] = (plus - minus) / (2 * eps)
            a = analytic[idx]
            if entrywise:
                denom = (a.abs() + numeric.abs()).clamp(min=1e-6)
                errors[name] = ((a - numeric).abs() / denom).max().item() if len(idx) else 0.0
            else:
                denom = max((a.norm() + numeric.norm()).item(), 1e-6)
                errors[name] = (a - numeric).norm().item() / denom
    model.zero_grad()
    return errors


def gradient_check(model, batches, eps=1e-5, max_entries=None, generator=None, entrywise=False):
    return max(gradient_errors(model, batches, eps, max_entries, generator, entrywise=entrywise).values())
