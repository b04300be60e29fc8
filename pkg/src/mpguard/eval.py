"""Scoring predictions against labelled attacks (attack = positive class)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InvalidArgument
from .ingest import LabelIntervals, runs_of_ones


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def score_pointwise(pred, truth) -> ConfusionMatrix:
    p = np.asarray(pred).astype(bool).reshape(-1)
    t = np.asarray(truth.per_step if isinstance(truth, LabelIntervals) else truth)
    t = t.astype(bool).reshape(-1)
    if p.shape != t.shape:
        raise InvalidArgument(f"prediction length {p.shape[0]} != label length {t.shape[0]}")
    return ConfusionMatrix(tp=int(np.sum(p & t)), fp=int(np.sum(p & ~t)),
                           tn=int(np.sum(~p & ~t)), fn=int(np.sum(~p & t)))


def accuracy(cm: ConfusionMatrix) -> float:
    """(tp + tn) / total; an empty matrix scores 1."""
    if cm.total == 0:
        return 1.0
    return (cm.tp + cm.tn) / cm.total


def f1(cm: ConfusionMatrix) -> float:
    """2 tp / (2 tp + fp + fn); 1 when there are no positives anywhere."""
    denom = 2 * cm.tp + cm.fp + cm.fn
    if denom == 0:
        return 1.0
    return 2 * cm.tp / denom


def _overlaps(a, b) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def score_events(pred_intervals, truth_intervals):
    """Per-event hits: a true interval is hit when any predicted interval overlaps it.

    Returns ``(events_total, events_hit, per_event)`` with ``per_event`` a list
    of ``((start, end), hit)``.
    """
    pred = sorted((int(s), int(e)) for s, e in pred_intervals)
    per_event = []
    k = 0
    for s, e in truth_intervals:
        s, e = int(s), int(e)
        while k < len(pred) and pred[k][1] < s:
            k += 1
        hit = k < len(pred) and _overlaps(pred[k], (s, e))
        per_event.append(((s, e), bool(hit)))
    return len(per_event), sum(h for _, h in per_event), per_event


@dataclass(frozen=True)
class DetectionReport:
    confusion: ConfusionMatrix
    accuracy: float
    f1: float
    events_total: int
    events_hit: int
    per_event: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "fn": self.confusion.fn,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "events_total": self.events_total,
            "events_hit": self.events_hit,
            "per_event": [{"start": s, "end": e, "hit": h} for (s, e), h in self.per_event],
        }


def build_report(pred, truth: LabelIntervals, pred_intervals=None) -> DetectionReport:
    """Point-wise metrics plus event hits; intervals default to runs of ``pred``."""
    cm = score_pointwise(pred, truth)
    if pred_intervals is None:
        pred_intervals = runs_of_ones(np.asarray(pred).astype(np.int8))
    total, hit, per_event = score_events(pred_intervals, truth.intervals)
    return DetectionReport(confusion=cm, accuracy=accuracy(cm), f1=f1(cm),
                           events_total=total, events_hit=hit, per_event=per_event)
