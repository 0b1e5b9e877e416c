"""AUC, ROC curves, the between-group ROC gap and robustness aggregates."""
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional

import numpy as np
from scipy.stats import rankdata
from sklearn import metrics as skmetrics
from sklearn.calibration import calibration_curve

from .exceptions import DegenerateLabels

# Upper edges of the AUC bands used for the ROC-gap/AUC tradeoff tables
AUC_BAND_EDGES = (-np.inf, 0.775, 0.825, 0.875, np.inf)


def _as_arrays(scores, labels):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).astype(int).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    return scores, labels


def _class_counts(labels, what='labels'):
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"{what} need at least one positive and one negative")
    return n_pos, n_neg


def auc(scores, labels):
    """Mann-Whitney estimate of P(score+ > score-) + P(tie) / 2."""
    scores, labels = _as_arrays(scores, labels)
    n_pos, n_neg = _class_counts(labels)
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def area(self):
        return float(skmetrics.auc(self.fpr, self.tpr))

    def right_limit(self, f):
        """TPR just after FPR ``f`` (upper end of a vertical step)."""
        i = np.searchsorted(self.fpr, f, side='right') - 1
        if self.fpr[i] == f or i == len(self.fpr) - 1:
            return self.tpr[i]
        return self._between(i, f)

    def left_limit(self, f):
        """TPR just before FPR ``f`` (lower end of a vertical step)."""
        i = np.searchsorted(self.fpr, f, side='left')
        if i == len(self.fpr) or self.fpr[i] == f:
            return self.tpr[min(i, len(self.fpr) - 1)]
        return self._between(i - 1, f)

    def _between(self, i, f):
        f0, f1 = self.fpr[i], self.fpr[i + 1]
        return self.tpr[i] + (self.tpr[i + 1] - self.tpr[i]) * (f - f0) / (f1 - f0)


def roc_curve(scores, labels):
    """Staircase ROC curve from (0, 0) to (1, 1); tied scores share one threshold."""
    scores, labels = _as_arrays(scores, labels)
    _class_counts(labels)
    fpr, tpr, _ = skmetrics.roc_curve(labels, scores, drop_intermediate=True)
    return RocCurve(fpr, tpr)


def _abs_area(width, d0, d1):
    """Integral of |d| over an interval where d moves linearly from d0 to d1."""
    if d0 * d1 >= 0:
        return width * (abs(d0) + abs(d1)) / 2
    return width * (d0 * d0 + d1 * d1) / (2 * (abs(d0) + abs(d1)))


def roc_gap(scores, labels, groups):
    """Absolute area between the group-0 and group-1 ROC curves."""
    scores, labels = _as_arrays(scores, labels)
    groups = np.asarray(groups).astype(int).ravel()
    curves = []
    for g in (0, 1):
        mask = groups == g
        _class_counts(labels[mask], f"group {g} labels")
        curves.append(roc_curve(scores[mask], labels[mask]))
    grid = np.union1d(curves[0].fpr, curves[1].fpr)
    gap = 0.0
    for f0, f1 in zip(grid[:-1], grid[1:]):
        d0 = curves[0].right_limit(f0) - curves[1].right_limit(f0)
        d1 = curves[0].left_limit(f1) - curves[1].left_limit(f1)
        gap += _abs_area(f1 - f0, d0, d1)
    return float(min(max(gap, 0.0), 1.0))


@dataclass(frozen=True)
class EvalReport:
    auc: float
    roc_gap: Optional[float]
    n_pos: Dict[int, int]
    n_neg: Dict[int, int]

    @property
    def valid(self):
        return self.roc_gap is not None


def evaluate(scores, labels, groups):
    """AUC over everyone plus the ROC gap; the gap is None when a group has one class."""
    scores, labels = _as_arrays(scores, labels)
    groups = np.asarray(groups).astype(int).ravel()
    n_pos = {g: int(np.count_nonzero(labels[groups == g] == 1)) for g in (0, 1)}
    n_neg = {g: int(np.count_nonzero(labels[groups == g] == 0)) for g in (0, 1)}
    try:
        gap = roc_gap(scores, labels, groups)
    except DegenerateLabels:
        gap = None
    return EvalReport(auc(scores, labels), gap, n_pos, n_neg)


class Aggregate(NamedTuple):
    median: float
    min: float
    max: float
    range: float


def aggregate(values):
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("cannot aggregate an empty list")
    lo, hi = float(values.min()), float(values.max())
    return Aggregate(float(np.median(values)), lo, hi, hi - lo)


def calibration_bins(probs, outcomes, n_bins=10):
    """(mean predicted, empirical rate, count) for each non-empty uniform bin."""
    probs = np.asarray(probs, dtype=float)
    outcomes = np.asarray(outcomes).astype(int)
    rate, mean_pred = calibration_curve(outcomes, probs, n_bins=n_bins, strategy='uniform')
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    counts = np.bincount(np.searchsorted(edges[1:-1], probs), minlength=n_bins)
    counts = counts[counts > 0]
    return list(zip(mean_pred.tolist(), rate.tolist(), counts.tolist()))
