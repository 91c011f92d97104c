"""RED: a GP fitted to the gap between prediction correctness and the base
classifier's maximum class probability.

Training rows get target 1 when the classifier was right and 0 otherwise; the
GP regresses ``target - max_prob`` on (features, softmax). At deployment the
detection score is ``max_prob + predicted residual`` and the GP's predictive
variance measures how far the query is from anything seen in training.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classifier import ClassifierOutput
from .errors import DataError, NoMisclassificationError
from .gp import GpModel, SparseGpModel, fit_exact, fit_sparse
from .kernel import KernelHyperparams
from .metrics import RankedEvaluation, average_precision
from .optimizer import FitReport, RestartSchedule, multi_restart_fit, select_top


@dataclass(frozen=True)
class ResidualTargets:
    c: np.ndarray
    r: np.ndarray

    @property
    def misclassified_count(self) -> int:
        return int(self.c.size - self.c.sum())

    @property
    def eligible(self) -> bool:
        return self.misclassified_count >= 1


def build_targets(labels, outputs: ClassifierOutput) -> ResidualTargets:
    labels = np.asarray(labels)
    if labels.shape != (outputs.n,):
        raise DataError(f"expected {outputs.n} labels, got shape {labels.shape}")
    c = (labels == outputs.predicted).astype(float)
    return ResidualTargets(c, c - outputs.max_prob)


@dataclass(frozen=True)
class DetectionScore:
    mean: np.ndarray
    variance: np.ndarray


@dataclass
class RedModel:
    candidates: list  # every completed restart's GP
    candidate_scores: np.ndarray
    selected: list  # positions into candidates, best first
    train_X: np.ndarray
    train_S: np.ndarray
    targets: ResidualTargets
    fit_report: Optional[FitReport] = None
    mode: str = "exact"
    aggregation: str = "ensemble"  # or "best"
    classifier_fingerprint: Optional[str] = None

    @property
    def members(self) -> list:
        chosen = self.selected if self.aggregation == "ensemble" else self.selected[:1]
        return [self.candidates[j] for j in chosen]

    def to_dict(self) -> dict:
        members = []
        for j in self.selected:
            g = self.candidates[j]
            d = {"hp": g.hp.to_dict(), "selection_score": _nan_to_none(self.candidate_scores[j])}
            if isinstance(g, GpModel):
                d.update(kind="exact", alpha=g.alpha.tolist())
            else:
                d.update(kind="sparse", inducing_idx=g.inducing_idx.tolist())
            members.append(d)
        return {
            "format": "redgp.red_model/1",
            "mode": self.mode,
            "aggregation": self.aggregation,
            "classifier_fingerprint": self.classifier_fingerprint,
            "train_X": self.train_X.tolist(),
            "train_S": self.train_S.tolist(),
            "c": self.targets.c.tolist(),
            "r": self.targets.r.tolist(),
            "members": members,
            "fit_report": None if self.fit_report is None else self.fit_report.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "RedModel":
        X = np.asarray(d["train_X"], float)
        S = np.asarray(d["train_S"], float)
        targets = ResidualTargets(np.asarray(d["c"], float), np.asarray(d["r"], float))
        cands, scores = [], []
        for mdict in d["members"]:
            hp = KernelHyperparams.from_dict(mdict["hp"])
            if mdict["kind"] == "exact":
                g = GpModel.from_dict({"hp": mdict["hp"], "train_X": X, "train_S": S,
                                       "targets_r": targets.r, "alpha": mdict["alpha"]})
            else:
                g = fit_sparse(hp, X, S, targets.r, inducing_idx=np.asarray(mdict["inducing_idx"]))
            cands.append(g)
            s = mdict.get("selection_score")
            scores.append(np.nan if s is None else s)
        return cls(cands, np.asarray(scores, float), list(range(len(cands))), X, S, targets, None,
                   d.get("mode", "exact"), d.get("aggregation", "ensemble"), d.get("classifier_fingerprint"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "RedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _nan_to_none(v):
    v = float(v)
    return None if not np.isfinite(v) else v


def _selection_ap(loo_mean, c_hat, correct, mask) -> float:
    """AP-Error of leave-one-out detection scores over ``mask`` rows; NaN if
    those rows lack either class."""
    err = ~correct[mask]
    if err.all() or not err.any():
        return float("nan")
    return average_precision(RankedEvaluation(-(c_hat + loo_mean)[mask], err, "error"))


def selection_scores(models: Sequence, c_hat, correct, val_mask=None) -> np.ndarray:
    """Per-model validation AP-Error computed from leave-one-out predictions.

    The validation rows are part of RED's training data, so in-sample
    predictions would reward interpolation; LOO means avoid that. Falls back
    to all training rows when the validation rows hold a single class.
    """
    correct = np.asarray(correct, bool)
    n = correct.size
    masks = [np.ones(n, bool)]
    if val_mask is not None:
        masks.insert(0, np.asarray(val_mask, bool))
    loos = [m.loo_mean() for m in models]
    for mask in masks:
        scores = np.array([_selection_ap(loo, c_hat, correct, mask) for loo in loos])
        if np.all(np.isfinite(scores)):
            return scores
    return np.full(len(models), np.nan)


def fit_red(X, outputs: ClassifierOutput, labels, schedule: RestartSchedule = RestartSchedule(),
            mode: str = "exact", val_mask=None, top_k: int = 3, aggregation: str = "ensemble",
            inducing_count: int = 50, classifier_fingerprint: Optional[str] = None) -> RedModel:
    """Fit RED on the classifier's training rows (train and validation together).

    Raises :class:`NoMisclassificationError` when the classifier made no
    mistakes on these rows.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] != outputs.n:
        raise DataError("features and classifier outputs differ in row count")
    targets = build_targets(labels, outputs)
    if not targets.eligible:
        raise NoMisclassificationError(
            "the base classifier made no errors on the RED training rows; nothing to learn")
    if aggregation not in ("ensemble", "best"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    S = outputs.softmax
    models, report = multi_restart_fit(X, S, targets.r, schedule, mode, inducing_count)
    scores = selection_scores(models, outputs.max_prob, targets.c.astype(bool), val_mask)
    lmls = [m.lml for m in models]
    chosen = select_top(models, scores, min(top_k, len(models)), lmls, report.completed)
    report.selected = [report.completed[j] for j in chosen]
    return RedModel(models, scores, chosen, X, np.asarray(S), targets, report, mode, aggregation,
                    classifier_fingerprint)


def _check_query(model: RedModel, X, S, c_hat, fingerprint):
    if fingerprint is not None and model.classifier_fingerprint is not None \
            and fingerprint != model.classifier_fingerprint:
        raise DataError("classifier fingerprint does not match the one RED was fitted on")
    X = np.atleast_2d(np.asarray(X, float))
    S = np.atleast_2d(np.asarray(S, float))
    c_hat = np.atleast_1d(np.asarray(c_hat, float))
    if X.shape[1] != model.train_X.shape[1] or S.shape[1] != model.train_S.shape[1]:
        raise DataError("query dimensions do not match the fitted model")
    if not (X.shape[0] == S.shape[0] == c_hat.size):
        raise DataError("query blocks differ in row count")
    return X, S, c_hat


def member_predictions(model: RedModel, X, S, members=None):
    """(means, variances) arrays of shape (n_members, n_rows)."""
    members = model.members if members is None else members
    preds = [g.predict(X, S) for g in members]
    return np.array([p[0] for p in preds]), np.array([p[1] for p in preds])


def score(model: RedModel, X, S, c_hat, fingerprint: Optional[str] = None) -> DetectionScore:
    """Detection-score distribution per row: mean ``c_hat + residual mean``
    (not clamped to [0, 1]) and the residual variance, averaged over members."""
    X, S, c_hat = _check_query(model, X, S, c_hat, fingerprint)
    means, variances = member_predictions(model, X, S)
    return DetectionScore(c_hat + means.mean(axis=0), variances.mean(axis=0))


def variance_score(model: RedModel, X, S, c_hat, fingerprint: Optional[str] = None) -> np.ndarray:
    return score(model, X, S, c_hat, fingerprint).variance
