"""Threshold-free detection metrics.

Tied scores cross every threshold together, so all curves are built from
groups of equal scores. Detector scores are oriented so that higher means
"more likely a correct, in-distribution prediction"; metrics whose positive
class is an error, OOD or adversarial row negate them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import DataError

METRIC_NAMES = ("ap_error", "aupr_error", "ap_success", "aupr_success", "auroc",
                "ap_ood", "aupr_ood", "ap_adversarial", "aupr_adversarial")
ERROR_METRICS = METRIC_NAMES[:5]


@dataclass(frozen=True)
class RankedEvaluation:
    scores: np.ndarray
    positives: np.ndarray
    positive_meaning: str = "error"

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).ravel()
        p = np.asarray(self.positives, dtype=bool).ravel()
        if s.shape != p.shape:
            raise DataError("scores and positives differ in length")
        if not np.all(np.isfinite(s)):
            raise DataError("scores must be finite")
        if not p.any():
            raise DataError("no positive examples")
        if p.all():
            raise DataError("no negative examples")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "positives", p)


def _grouped_counts(ev: RankedEvaluation):
    """Cumulative (tp, fp) after each group of tied scores, highest first."""
    order = np.argsort(-ev.scores, kind="mergesort")
    s = ev.scores[order]
    pos = ev.positives[order]
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(pos)[ends]
    fp = (ends + 1) - tp
    return tp, fp


def pr_curve(ev: RankedEvaluation):
    """(precision, recall) arrays. The first point sits at recall 0 with the
    first group's precision; the last point has recall 1."""
    tp, fp = _grouped_counts(ev)
    n_pos = tp[-1]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return np.r_[precision[0], precision], np.r_[0.0, recall]


def average_precision(ev: RankedEvaluation) -> float:
    tp, fp = _grouped_counts(ev)
    dtp = np.diff(np.r_[0, tp])
    return float(np.sum(dtp * (tp / (tp + fp))) / tp[-1])


def aupr(ev: RankedEvaluation) -> float:
    precision, recall = pr_curve(ev)
    return float(np.sum(np.diff(recall) * (precision[1:] + precision[:-1]) / 2.0))


def auroc(ev: RankedEvaluation) -> float:
    """P(positive outscores negative) + 0.5 P(tie), via the rank-sum statistic."""
    ranks = rankdata(ev.scores)
    n_pos = int(ev.positives.sum())
    n_neg = ev.positives.size - n_pos
    u = ranks[ev.positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _pair(scores, positives, meaning):
    try:
        return RankedEvaluation(scores, positives, meaning), None
    except DataError as exc:
        return None, str(exc)


def evaluate_detector(scores, correctness, ood_mask=None, adv_mask=None) -> dict:
    """All nine metrics for one detector.

    ``scores`` and ``correctness`` cover every row; ``correctness`` is
    ignored on synthetic rows. Returns ``{"values": {...}, "na_reasons": {...}}``
    with ``None`` for metrics that are undefined on this data.
    """
    s = np.asarray(scores, dtype=float).ravel()
    n = s.size
    correct = np.asarray(correctness, dtype=bool).ravel()
    ood = np.zeros(n, bool) if ood_mask is None else np.asarray(ood_mask, bool).ravel()
    adv = np.zeros(n, bool) if adv_mask is None else np.asarray(adv_mask, bool).ravel()
    if not (correct.size == ood.size == adv.size == n):
        raise DataError("scores, correctness and masks must share one length")
    if np.any(ood & adv):
        raise DataError("OOD and adversarial masks overlap")
    ind = ~(ood | adv)
    values, reasons = {}, {}

    def put(name, fn, ev, why):
        if ev is None:
            values[name], reasons[name] = None, why
        else:
            values[name] = fn(ev)

    err, why = _pair(-s[ind], ~correct[ind], "error")
    suc, why_s = _pair(s[ind], correct[ind], "success")
    put("ap_error", average_precision, err, why)
    put("aupr_error", aupr, err, why)
    put("ap_success", average_precision, suc, why_s)
    put("aupr_success", aupr, suc, why_s)
    put("auroc", auroc, err, why)
    if ood.any():
        keep = ind | ood
        ev, why = _pair(-s[keep], ood[keep], "ood")
        put("ap_ood", average_precision, ev, why)
        put("aupr_ood", aupr, ev, why)
    if adv.any():
        keep = ind | adv
        ev, why = _pair(-s[keep], adv[keep], "adversarial")
        put("ap_adversarial", average_precision, ev, why)
        put("aupr_adversarial", aupr, ev, why)
    return {"values": values, "na_reasons": reasons}
