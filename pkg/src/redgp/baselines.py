"""Comparison detectors.

Every detector returns scores oriented so that a higher value means the
prediction is more likely correct.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .classifier import ClassifierOutput, MlpConfig, predict_regression, train_regressor
from .data import LabeledDataset
from .errors import DataError, NoMisclassificationError
from .optimizer import RestartSchedule, multi_restart_fit, select_top
from .red import selection_scores

TRUST_FLOOR = 1e-12
NOISE_PRECISION_GRID = tuple(np.logspace(-3, 4, 29))


@dataclass(frozen=True)
class DetectorOutput:
    scores: np.ndarray
    detector_name: str
    variance: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).ravel()
        if not np.all(np.isfinite(s)):
            raise DataError(f"{self.detector_name}: scores must be finite")
        object.__setattr__(self, "scores", s)
        if self.variance is not None:
            object.__setattr__(self, "variance", np.asarray(self.variance, dtype=float).ravel())

    @property
    def n(self) -> int:
        return self.scores.size


def save_detector_output(out: DetectorOutput, path, ids=None) -> None:
    ids = range(out.n) if ids is None else ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "score", "detector_name"])
        for i, s in zip(ids, out.scores):
            w.writerow([i, repr(float(s)), out.detector_name])


def mcp(outputs: ClassifierOutput) -> DetectorOutput:
    return DetectorOutput(outputs.max_prob.copy(), "mcp")


def softmax_entropy(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def entropy_detector(outputs: ClassifierOutput) -> DetectorOutput:
    return DetectorOutput(-softmax_entropy(outputs.softmax), "entropy")


# --- Trust Score -----------------------------------------------------------

def _filter_dense(Xc: np.ndarray, k: int, alpha: float) -> np.ndarray:
    """Drop the ``alpha`` fraction of points with the largest k-NN radius."""
    if alpha <= 0 or Xc.shape[0] <= 1:
        return Xc
    kk = min(k, Xc.shape[0] - 1)
    D = cdist(Xc, Xc)
    radius = np.sort(D, axis=1)[:, kk]  # column 0 is the point itself
    keep = max(1, int(np.ceil((1 - alpha) * Xc.shape[0])))
    order = np.argsort(radius, kind="mergesort")[:keep]
    return Xc[np.sort(order)]


def trust_score(train: LabeledDataset, test_X, test_pred, k: int = 10, alpha: float = 0.0) -> DetectorOutput:
    """Distance to the nearest other-class training point divided by the
    distance to the nearest predicted-class training point.

    With ``alpha > 0`` each class first loses its ``alpha`` fraction of
    lowest-density points, density being the distance to the k-th neighbour.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    test_X = np.atleast_2d(np.asarray(test_X, dtype=float))
    test_pred = np.asarray(test_pred, dtype=int)
    K = train.num_classes
    present = np.unique(train.labels)
    if present.size != K:
        missing = sorted(set(range(K)) - set(present.tolist()))
        raise DataError(f"trust score needs every class in the training data; missing {missing}")
    if test_X.shape[1] != train.m:
        raise DataError("test features do not match training width")
    if test_pred.shape != (test_X.shape[0],):
        raise DataError("one predicted label per test row is required")
    dist = np.empty((test_X.shape[0], K))
    for c in range(K):
        Xc = _filter_dense(train.features[train.labels == c], k, alpha)
        dist[:, c] = cdist(test_X, Xc).min(axis=1)
    rows = np.arange(test_X.shape[0])
    d_pred = np.maximum(dist[rows, test_pred], TRUST_FLOOR)
    other = dist.copy()
    other[rows, test_pred] = np.inf
    return DetectorOutput(other.min(axis=1) / d_pred, "trust_score")


# --- Bayesian linear regression -------------------------------------------

@dataclass(frozen=True)
class BlrPosterior:
    mean: np.ndarray
    cov: np.ndarray
    noise_precision: float
    prior_precision: float
    log_evidence: float


def _blr_posterior(Phi, t, a, beta):
    n, d = Phi.shape
    A = a * np.eye(d) + beta * Phi.T @ Phi
    cf = cho_factor(A, lower=True)
    m = beta * cho_solve(cf, Phi.T @ t)
    cov = cho_solve(cf, np.eye(d))
    resid = t - Phi @ m
    E = 0.5 * beta * resid @ resid + 0.5 * a * m @ m
    logdetA = 2.0 * np.log(np.diag(cf[0])).sum()
    ev = 0.5 * d * np.log(a) + 0.5 * n * np.log(beta) - E - 0.5 * logdetA - 0.5 * n * np.log(2 * np.pi)
    return BlrPosterior(m, cov, beta, a, float(ev))


def blr_fit(design, targets, prior_precision: float = 1.0,
            noise_precision: Optional[float] = None, grid: Sequence[float] = NOISE_PRECISION_GRID) -> BlrPosterior:
    """Conjugate Gaussian posterior over weights under a zero-mean isotropic
    prior. ``noise_precision=None`` picks it from ``grid`` by evidence."""
    Phi = np.atleast_2d(np.asarray(design, dtype=float))
    t = np.asarray(targets, dtype=float).ravel()
    if Phi.shape[0] != t.size:
        raise DataError("design rows and targets differ in length")
    if not (np.all(np.isfinite(Phi)) and np.all(np.isfinite(t))):
        raise DataError("BLR inputs must be finite")
    if not prior_precision > 0:
        raise ValueError("prior_precision must be positive")
    if noise_precision is not None:
        if not noise_precision > 0:
            raise ValueError("noise_precision must be positive")
        return _blr_posterior(Phi, t, prior_precision, float(noise_precision))
    best = None
    for beta in grid:
        post = _blr_posterior(Phi, t, prior_precision, float(beta))
        if best is None or post.log_evidence > best.log_evidence:
            best = post
    return best


def blr_predict(post: BlrPosterior, rows):
    """Predictive (mean, variance); the variance includes observation noise."""
    Phi = np.atleast_2d(np.asarray(rows, dtype=float))
    mean = Phi @ post.mean
    var = 1.0 / post.noise_precision + np.einsum("ij,jk,ik->i", Phi, post.cov, Phi)
    return mean, var


def with_bias(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([X, np.ones((X.shape[0], 1))])


def dngo_detector(train_logits, correct, test_logits) -> DetectorOutput:
    """BLR on the classifier logits predicting 1 for a correct prediction."""
    post = blr_fit(with_bias(train_logits), np.asarray(correct, dtype=float))
    mean, var = blr_predict(post, with_bias(test_logits))
    return DetectorOutput(mean, "dngo", var)


def blr_residual_detector(train_X, train_S, residuals, test_X, test_S, test_c_hat) -> DetectorOutput:
    """RED with the GP swapped for BLR on [features, softmax]."""
    post = blr_fit(with_bias(np.hstack([train_X, train_S])), residuals)
    mean, var = blr_predict(post, with_bias(np.hstack([test_X, test_S])))
    return DetectorOutput(np.asarray(test_c_hat, float) + mean, "blr_residual", var)


# --- direct GP -------------------------------------------------------------

def direct_gp_detector(train_X, correct, test_X, schedule: RestartSchedule = RestartSchedule(),
                       mode: str = "exact", val_mask=None, top_k: int = 3,
                       inducing_count: int = 50) -> DetectorOutput:
    """GP with the input kernel only, regressing correctness directly.

    Restart selection mirrors RED: top ``top_k`` by leave-one-out AP-Error,
    predictions averaged.
    """
    X = np.asarray(train_X, dtype=float)
    c = np.asarray(correct, dtype=float)
    if c.min() == c.max():
        raise NoMisclassificationError("direct GP needs both correct and incorrect training rows")
    sched = replace(schedule, output_kernel=False)
    S = np.zeros((X.shape[0], 1))
    models, report = multi_restart_fit(X, S, c, sched, mode, inducing_count)
    scores = selection_scores(models, np.zeros(c.size), c.astype(bool), val_mask)
    chosen = select_top(models, scores, min(top_k, len(models)), [m.lml for m in models], report.completed)
    Xq = np.atleast_2d(np.asarray(test_X, dtype=float))
    Sq = np.zeros((Xq.shape[0], 1))
    preds = [models[j].predict(Xq, Sq) for j in chosen]
    return DetectorOutput(np.mean([p[0] for p in preds], axis=0), "direct_gp",
                          np.mean([p[1] for p in preds], axis=0))


# --- MLP regressors ----------------------------------------------------------

BASELINE_MLP = MlpConfig(optimizer="rmsprop")


def true_class_probability(outputs: ClassifierOutput, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    return outputs.softmax[np.arange(outputs.n), labels]


def confidnet_detector(train_X, train_target, val_X, val_target, test_X,
                       cfg: MlpConfig = BASELINE_MLP) -> DetectorOutput:
    """MLP regressor from features to the softmax probability of the true class."""
    model = train_regressor(train_X, train_target, val_X, val_target, cfg)
    return DetectorOutput(predict_regression(model, test_X), "confidnet")


def introspection_detector(train_logits, train_correct, val_logits, val_correct, test_logits,
                           cfg: MlpConfig = BASELINE_MLP) -> DetectorOutput:
    """MLP regressor from logits to 1/0 correctness."""
    model = train_regressor(train_logits, np.asarray(train_correct, float), val_logits,
                            np.asarray(val_correct, float), cfg)
    return DetectorOutput(predict_regression(model, test_logits), "introspection")
