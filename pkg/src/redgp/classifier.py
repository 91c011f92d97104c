"""Feed-forward MLP base classifier and the outputs RED consumes.

The same small engine trains the squared-error regressors used by the
ConfidNet-style and Introspection-style baselines.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Optional

import numpy as np

from ._random import make_rng
from .errors import DataError, NumericalError

if TYPE_CHECKING:
    from .data import LabeledDataset

SIMPLEX_TOL = 1e-6


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class ClassifierOutput:
    """Per-row softmax vector, logits, argmax label and maximum probability.

    ``predicted`` and ``max_prob`` are always derived from ``softmax``;
    ties go to the lowest class index.
    """
    softmax: np.ndarray
    logits: Optional[np.ndarray] = None
    predicted: np.ndarray = field(init=False)
    max_prob: np.ndarray = field(init=False)

    def __post_init__(self):
        S = np.array(self.softmax, dtype=float)
        if S.ndim != 2:
            raise DataError("softmax must be a 2-D array")
        if np.any(S < 0) or np.any(S > 1) or np.any(np.abs(S.sum(axis=1) - 1) > 1e-9):
            raise DataError("softmax rows must lie on the probability simplex")
        S.setflags(write=False)
        object.__setattr__(self, "softmax", S)
        if self.logits is not None:
            L = np.array(self.logits, dtype=float)
            if L.shape != S.shape:
                raise DataError("logits and softmax shapes differ")
            L.setflags(write=False)
            object.__setattr__(self, "logits", L)
        pred = S.argmax(axis=1)
        mp = S[np.arange(S.shape[0]), pred]
        pred.setflags(write=False)
        mp.setflags(write=False)
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "max_prob", mp)

    @property
    def n(self) -> int:
        return self.softmax.shape[0]

    @property
    def num_classes(self) -> int:
        return self.softmax.shape[1]

    def subset(self, idx) -> "ClassifierOutput":
        idx = np.asarray(idx, dtype=np.int64)
        return ClassifierOutput(self.softmax[idx], None if self.logits is None else self.logits[idx])

    @staticmethod
    def concat(parts) -> "ClassifierOutput":
        parts = list(parts)
        logits = None
        if all(p.logits is not None for p in parts):
            logits = np.vstack([p.logits for p in parts])
        return ClassifierOutput(np.vstack([p.softmax for p in parts]), logits)


def save_outputs(out: ClassifierOutput, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    K = out.num_classes
    header = [f"p{k}" for k in range(K)]
    if out.logits is not None:
        header += [f"l{k}" for k in range(K)]
    header.append("pred")
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(out.n):
            row = [repr(float(v)) for v in out.softmax[i]]
            if out.logits is not None:
                row += [repr(float(v)) for v in out.logits[i]]
            w.writerow(row + [int(out.predicted[i])])


def load_outputs(path, K: int) -> ClassifierOutput:
    """Read precomputed classifier outputs (columns ``p0..p{K-1}``, optional
    ``l0..l{K-1}``). Rows within 1e-6 of the simplex are renormalized; larger
    drift or negative entries are rejected."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"outputs file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        pcols = [f"p{k}" for k in range(K)]
        lcols = [f"l{k}" for k in range(K)]
        fields = reader.fieldnames or []
        if any(c not in fields for c in pcols):
            raise DataError(f"{path}: expected probability columns {pcols}")
        has_logits = all(c in fields for c in lcols)
        probs, logits = [], []
        for lineno, rec in enumerate(reader, start=2):
            try:
                p = [float(rec[c]) for c in pcols]
                if has_logits:
                    logits.append([float(rec[c]) for c in lcols])
            except (TypeError, ValueError):
                raise DataError(f"row {lineno}: non-numeric probability or logit") from None
            if min(p) < 0:
                raise DataError(f"row {lineno}: negative probability")
            s = sum(p)
            if abs(s - 1.0) > SIMPLEX_TOL:
                raise DataError(f"row {lineno}: probabilities sum to {s}, off the simplex")
            probs.append([v / s for v in p])
    if not probs:
        raise DataError(f"{path}: no rows")
    return ClassifierOutput(np.asarray(probs), np.asarray(logits) if has_logits else None)


# -- MLP engine --------------------------------------------------------------

@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple = (64, 64)
    activation: str = "relu"
    max_epochs: int = 1000
    patience: int = 10
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    rmsprop_rho: float = 0.9
    epsilon: float = 1e-7
    optimizer: str = "adam"  # "adam" | "rmsprop"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be >= 1")
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")
        if self.optimizer not in ("adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class MlpModel:
    config: MlpConfig
    weights: tuple
    biases: tuple
    task: str = "classification"  # or "regression"
    best_epoch: int = 0
    val_history: tuple = ()

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DataError(f"expected {self.input_dim} input columns, got shape {X.shape}")
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["hidden_sizes"] = list(cfg["hidden_sizes"])
        return {
            "task": self.task,
            "config": cfg,
            "layer_shapes": [list(W.shape) for W in self.weights],
            "weights": [W.ravel().tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "best_epoch": self.best_epoch,
            "val_history": list(self.val_history),
        }

    @classmethod
    def from_dict(cls, d) -> "MlpModel":
        cfg = MlpConfig(**{**d["config"], "hidden_sizes": tuple(d["config"]["hidden_sizes"])})
        Ws = tuple(np.asarray(w, float).reshape(s) for w, s in zip(d["weights"], d["layer_shapes"]))
        bs = tuple(np.asarray(b, float) for b in d["biases"])
        return cls(cfg, Ws, bs, d.get("task", "classification"), d.get("best_epoch", 0),
                   tuple(d.get("val_history", ())))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _init_params(sizes, rng):
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(3.0 / fan_in)
        Ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return Ws, bs


def _xent(logits, y):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return -logp[np.arange(len(y)), y].mean(), logp


def _loss_and_grad(Ws, bs, X, T, task):
    hs = [X]
    h = X
    for W, b in zip(Ws[:-1], bs[:-1]):
        h = np.maximum(h @ W + b, 0.0)
        hs.append(h)
    out = h @ Ws[-1] + bs[-1]
    n = X.shape[0]
    if task == "classification":
        loss, logp = _xent(out, T)
        delta = np.exp(logp)
        delta[np.arange(n), T] -= 1.0
        delta /= n
    else:
        err = out[:, 0] - T
        loss = float(np.mean(err ** 2))
        delta = (2.0 / n) * err[:, None]
    gW, gb = [None] * len(Ws), [None] * len(Ws)
    for layer in range(len(Ws) - 1, -1, -1):
        gW[layer] = hs[layer].T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ Ws[layer].T) * (hs[layer] > 0)
    return float(loss), gW, gb


def _loss(Ws, bs, X, T, task):
    h = X
    for W, b in zip(Ws[:-1], bs[:-1]):
        h = np.maximum(h @ W + b, 0.0)
    out = h @ Ws[-1] + bs[-1]
    if task == "classification":
        return float(_xent(out, T)[0])
    return float(np.mean((out[:, 0] - T) ** 2))


def _train(X, T, Xv, Tv, out_dim, cfg: MlpConfig, task: str) -> MlpModel:
    """Full-batch training with early stopping on validation loss; returns the
    snapshot from the best validation epoch."""
    rng = make_rng(cfg.seed)
    Ws, bs = _init_params([X.shape[1], *cfg.hidden_sizes, out_dim], rng)
    params = Ws + bs
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    best = np.inf
    best_params = [p.copy() for p in params]
    best_epoch, wait = 0, 0
    history = []
    b1, b2, lr, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.learning_rate, cfg.epsilon
    L = len(Ws)
    for epoch in range(1, cfg.max_epochs + 1):
        loss, gW, gb = _loss_and_grad(params[:L], params[L:], X, T, task)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite training loss at epoch {epoch}")
        grads = gW + gb
        for i, (p, g) in enumerate(zip(params, grads)):
            if cfg.optimizer == "adam":
                m1[i] = b1 * m1[i] + (1 - b1) * g
                m2[i] = b2 * m2[i] + (1 - b2) * g * g
                mhat = m1[i] / (1 - b1 ** epoch)
                vhat = m2[i] / (1 - b2 ** epoch)
                p -= lr * mhat / (np.sqrt(vhat) + eps)
            else:
                m2[i] = cfg.rmsprop_rho * m2[i] + (1 - cfg.rmsprop_rho) * g * g
                p -= lr * g / (np.sqrt(m2[i]) + eps)
        vloss = _loss(params[:L], params[L:], Xv, Tv, task)
        if not np.isfinite(vloss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}")
        history.append(vloss)
        if vloss < best:
            best, best_epoch, wait = vloss, epoch, 0
            best_params = [p.copy() for p in params]
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    return MlpModel(cfg, tuple(best_params[:L]), tuple(best_params[L:]), task, best_epoch, tuple(history))


def train_mlp(train: "LabeledDataset", val: "LabeledDataset", cfg: MlpConfig = MlpConfig()) -> MlpModel:
    """Train the base classifier with Adam on mean cross-entropy."""
    if train.m != val.m or train.num_classes != val.num_classes:
        raise DataError("train and validation sets disagree on feature count or class count")
    return _train(train.features, train.labels, val.features, val.labels, train.num_classes, cfg,
                  "classification")


def train_regressor(X, t, Xv, tv, cfg: MlpConfig) -> MlpModel:
    """Single-output MLP regressor on mean squared error."""
    X, Xv = np.asarray(X, float), np.asarray(Xv, float)
    if X.shape[1] != Xv.shape[1]:
        raise DataError("train and validation inputs differ in width")
    return _train(X, np.asarray(t, float), Xv, np.asarray(tv, float), 1, cfg, "regression")


def predict(model: MlpModel, X) -> ClassifierOutput:
    logits = model.forward(X)
    return ClassifierOutput(softmax(logits), logits)


def predict_regression(model: MlpModel, X) -> np.ndarray:
    return model.forward(X)[:, 0]
