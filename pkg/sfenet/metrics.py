"""Frame- and video-level AUC, AP and EER.

Ties: midranks for AUC, sample id breaks ties for AP, whole tie groups move
together along the ROC. EER interpolates linearly between ROC vertices.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata


REPORT_FIELDS = ('frame_auc', 'video_auc', 'ap', 'eer', 'n_pos', 'n_neg')


@dataclass(frozen=True)
class ScoredSample:
    id: str
    score: float
    label: int
    video_id: str
    family: Optional[str] = None

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError('sample %s has non-finite score %r' % (self.id, self.score))
        if self.label not in (0, 1):
            raise ValueError('sample %s has label %r, expected 0 or 1' % (self.id, self.label))


@dataclass
class MetricReport:
    frame_auc: float
    video_auc: float
    ap: float
    eer: float
    n_pos: int
    n_neg: int
    roc: List[Tuple[float, float, float]] = field(default_factory=list)
    family_auc: Dict[str, float] = field(default_factory=dict)

    def as_frame(self):
        return pd.DataFrame({'metric': list(REPORT_FIELDS),
                             'value': [getattr(self, k) for k in REPORT_FIELDS]})

    def roc_frame(self):
        return pd.DataFrame(self.roc, columns=['fpr', 'tpr', 'threshold'])

    def table(self):
        rows = ['%-10s %s' % (k, _fmt(getattr(self, k))) for k in REPORT_FIELDS]
        rows += ['auc[%s] %s' % (family, _fmt(v)) for family, v in sorted(self.family_auc.items())]
        return '\n'.join(rows)


def _fmt(v):
    return '%i' % v if isinstance(v, (int, np.integer)) else '%.6f' % v


def _arrays(samples):
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return scores, labels


def _require_both_classes(labels):
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError('need both classes, got %i positive and %i negative samples' % (n_pos, n_neg))
    return n_pos, n_neg


def auc(samples):
    scores, labels = _arrays(samples)
    n_pos, n_neg = _require_both_classes(labels)
    ranks = rankdata(scores, method='average')
    r_pos = ranks[labels == 1].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _ranking(samples):
    # descending score, then ascending id
    return sorted(samples, key=lambda s: (-s.score, s.id))


def average_precision(samples):
    ordered = _ranking(samples)
    labels = np.array([s.label for s in ordered], dtype=np.int64)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError('average precision needs at least one positive sample')
    hits = np.cumsum(labels)
    precision = hits / np.arange(1, len(labels) + 1)
    return float(np.sum(precision[labels == 1]) / n_pos)


def roc_curve(samples):
    """ROC vertices (fpr, tpr, threshold); a sample is positive iff score >= threshold."""
    scores, labels = _arrays(samples)
    n_pos, n_neg = _require_both_classes(labels)
    thresholds = np.unique(scores)[::-1]
    roc = [(0.0, 0.0, float('inf'))]
    for t in thresholds:
        predicted = scores >= t
        tpr = np.sum(predicted & (labels == 1)) / n_pos
        fpr = np.sum(predicted & (labels == 0)) / n_neg
        roc.append((float(fpr), float(tpr), float(t)))
    return roc


def eer(samples):
    roc = roc_curve(samples)
    gaps = [fpr - (1.0 - tpr) for fpr, tpr, _ in roc]
    for k, gap in enumerate(gaps):
        if gap == 0.0:
            return roc[k][0]
        if gap > 0.0:
            prev_gap = gaps[k - 1]
            alpha = -prev_gap / (gap - prev_gap)
            return roc[k - 1][0] + alpha * (roc[k][0] - roc[k - 1][0])
    raise AssertionError('ROC must end at (1, 1)')


def video_level(samples):
    videos = OrderedDict()
    for s in samples:
        videos.setdefault(s.video_id, []).append(s)
    out = []
    for video_id, frames in videos.items():
        labels = {f.label for f in frames}
        if len(labels) != 1:
            raise ValueError('video %s mixes labels %r' % (video_id, sorted(labels)))
        score = float(np.mean([f.score for f in frames]))
        out.append(ScoredSample(id=video_id, score=score, label=frames[0].label,
                                video_id=video_id, family=frames[0].family))
    return out


def family_auc(samples):
    """AUC of the real samples against each forgery family on its own."""
    reals = [s for s in samples if s.label == 0]
    families = sorted({s.family for s in samples if s.label == 1 and s.family is not None})
    return {f: auc(reals + [s for s in samples if s.label == 1 and s.family == f]) for f in families}


def evaluate(samples):
    _, labels = _arrays(samples)
    n_pos, n_neg = _require_both_classes(labels)
    videos = video_level(samples)
    return MetricReport(frame_auc=auc(samples), video_auc=auc(videos), ap=average_precision(samples),
                        eer=eer(samples), n_pos=n_pos, n_neg=n_neg, roc=roc_curve(samples),
                        family_auc=family_auc(samples))
