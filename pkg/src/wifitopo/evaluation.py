"""Scoring distance matrices against ground truth.

The positive class is *different locations*: a pair is classified 1 when
its distance is at least the threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .errors import UndefinedCorrelationError, ValidationError


@dataclass(frozen=True)
class LabeledSegment:
    segment_id: object
    location_label: str
    position: Optional[tuple] = None

    def __post_init__(self):
        if self.location_label is None or str(self.location_label) == "":
            raise ValidationError(f"segment {self.segment_id} has an empty label")
        if self.position is not None:
            pos = tuple(float(c) for c in self.position)
            if len(pos) != 2 or not all(math.isfinite(c) for c in pos):
                raise ValidationError(f"segment {self.segment_id}: bad position {self.position}")
            object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class RocCurve:
    """ROC points ``(fpr, tpr, threshold)`` from the strictest threshold down."""

    points: tuple
    auc: float

    @property
    def fpr(self):
        return np.array([p[0] for p in self.points])

    @property
    def tpr(self):
        return np.array([p[1] for p in self.points])

    def curve_area(self) -> float:
        return float(trapezoid(self.tpr, self.fpr))


@dataclass(frozen=True)
class CorrelationReport:
    pearson: float
    spearman: float
    kendall_tau: float
    n_pairs: int

    def as_dict(self) -> dict:
        return {"pearson": self.pearson, "spearman": self.spearman,
                "kendall_tau": self.kendall_tau, "n_pairs": self.n_pairs}


def classify_pair(d: float, tau: float) -> int:
    """Heaviside classifier: 1 ("different locations") iff ``d >= tau``."""
    return 1 if d - tau >= 0 else 0


def mann_whitney_auc(same: Sequence[float], diff: Sequence[float]) -> float:
    """P(random different-location distance > random same-location distance), ties 1/2."""
    same = np.asarray(same, float)
    diff = np.asarray(diff, float)
    ranks = stats.rankdata(np.concatenate([diff, same]))
    n_d, n_s = diff.size, same.size
    u = ranks[:n_d].sum() - n_d * (n_d + 1) / 2.0
    return float(u / (n_d * n_s))


def roc_auc(same_distances: Sequence[float], diff_distances: Sequence[float]) -> RocCurve:
    """Sweep every observed distance as threshold and report the Mann-Whitney AUC.

    Raises
    ------
    ValueError
        If either list is empty.
    """
    same = np.asarray(same_distances, float)
    diff = np.asarray(diff_distances, float)
    if same.size == 0:
        raise ValueError("roc_auc: same-location distance list is empty")
    if diff.size == 0:
        raise ValueError("roc_auc: different-location distance list is empty")

    thresholds = np.concatenate([[np.inf], np.unique(np.concatenate([same, diff]))[::-1],
                                 [-np.inf]])
    same_sorted = np.sort(same)
    diff_sorted = np.sort(diff)
    # pairs with d >= tau are labelled positive
    tp = diff.size - np.searchsorted(diff_sorted, thresholds, side="left")
    fp = same.size - np.searchsorted(same_sorted, thresholds, side="left")
    points = tuple((fp[k] / same.size, tp[k] / diff.size, float(thresholds[k]))
                   for k in range(thresholds.size))
    return RocCurve(points, mann_whitney_auc(same, diff))


def _index_labels(matrix, labels):
    by_id = {l.segment_id: l for l in labels}
    by_str = {str(l.segment_id): l for l in labels}
    out, missing = [], []
    for sid in matrix.segment_ids:
        lab = by_id.get(sid, by_str.get(str(sid)))
        if lab is None:
            missing.append(sid)
        out.append(lab)
    if missing:
        raise ValidationError(f"unlabeled segments: {missing}")
    return out


def label_pairs(matrix, labels: Sequence[LabeledSegment]):
    """Split upper-triangle distances into same- and different-location lists."""
    labs = _index_labels(matrix, labels)
    same, diff = [], []
    for i, j, d in matrix.upper_triangle():
        (same if labs[i].location_label == labs[j].location_label else diff).append(d)
    return same, diff


def correlations(matrix, labels: Sequence[LabeledSegment]) -> CorrelationReport:
    """Pearson, Spearman and Kendall tau-b between computed and floor-plan distances."""
    labs = _index_labels(matrix, labels)
    unplaced = [l.segment_id for l in labs if l.position is None]
    if unplaced:
        raise ValidationError(f"segments without position: {unplaced}")
    computed, plan = [], []
    for i, j, d in matrix.upper_triangle():
        computed.append(d)
        plan.append(math.dist(labs[i].position, labs[j].position))
    return correlate(computed, plan)


def correlate(x: Sequence[float], y: Sequence[float]) -> CorrelationReport:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 2:
        raise ValidationError("need at least two pairs to correlate")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("correlation undefined: one side has zero variance")
    pearson = float(stats.pearsonr(x, y)[0])
    spearman = float(stats.spearmanr(x, y)[0])
    kendall = float(stats.kendalltau(x, y, variant="b")[0])
    clip = lambda v: min(1.0, max(-1.0, v))  # noqa: E731
    return CorrelationReport(clip(pearson), clip(spearman), clip(kendall), int(x.size))


# --------------------------------------------------------------------------
# I/O


def write_roc_csv(curve: RocCurve, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("threshold", "fpr", "tpr"))
    for fpr, tpr, tau in curve.points:
        w.writerow((repr(tau), repr(float(fpr)), repr(float(tpr))))


def read_labels(stream: TextIO) -> list:
    """Read ``segment_id,label,x,y`` rows; ``x``/``y`` may be blank or absent."""
    reader = csv.DictReader(stream)
    out = []
    for row in reader:
        sid = (row.get("segment_id") or "").strip()
        label = (row.get("label") or "").strip()
        if not sid:
            raise ValidationError(f"line {reader.line_num}: missing segment_id")
        x, y = (row.get("x") or "").strip(), (row.get("y") or "").strip()
        pos = (float(x), float(y)) if x and y else None
        out.append(LabeledSegment(int(sid) if sid.lstrip("-").isdigit() else sid, label, pos))
    return out


def write_labels(labels: Sequence[LabeledSegment], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("segment_id", "label", "x", "y"))
    for l in labels:
        x, y = (repr(l.position[0]), repr(l.position[1])) if l.position else ("", "")
        w.writerow((l.segment_id, l.location_label, x, y))
