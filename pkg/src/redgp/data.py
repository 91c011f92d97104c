"""Dataset ingestion, standardization, splitting and synthetic test batches."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._random import make_rng
from .classifier import ClassifierOutput
from .errors import DataError

TEST_FRACTION = 0.2
VAL_FRACTION = 0.2


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    feature_names: tuple = ()

    def __post_init__(self):
        X = _frozen(self.features)
        y = _frozen(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, m = X.shape
        if n < 1 or m < 1:
            raise DataError("empty dataset")
        if y.shape != (n,):
            raise DataError(f"expected {n} labels, got {y.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite feature values")
        if y.min() < 0 or y.max() >= self.num_classes:
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(m))
        if len(names) != m:
            raise DataError("feature_names length does not match column count")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes, self.feature_names)

    def with_features(self, X) -> "LabeledDataset":
        return LabeledDataset(X, self.labels, self.num_classes, self.feature_names)


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: non-numeric value {cell!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {col!r}: non-finite value {cell!r}")
    return v


def load_dataset(path, label_column: str = "label",
                 feature_columns: Optional[Sequence[str]] = None) -> LabeledDataset:
    """Read a CSV with a header row into a :class:`LabeledDataset`.

    Without ``feature_columns`` every column except ``label_column`` (and a
    ``kind`` column, if present) is a feature. Row numbers in error messages
    are 1-based file lines, header included.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataError(f"{path}: no {label_column!r} column")
        if feature_columns is None:
            feature_columns = [h for h in header if h not in (label_column, "kind")]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        fidx = [header.index(c) for c in feature_columns]
        lidx = header.index(label_column)
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} fields, got {len(rec)}")
            rows.append([_parse_float(rec[j], lineno, header[j]) for j in fidx])
            lab = _parse_float(rec[lidx], lineno, label_column)
            if lab != int(lab) or lab < 0:
                raise DataError(f"row {lineno}, column {label_column!r}: label {rec[lidx]!r} is not a non-negative integer")
            labels.append(int(lab))
    if not rows:
        raise DataError(f"{path}: no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    return LabeledDataset(np.asarray(rows), labels, int(labels.max()) + 1, tuple(feature_columns))


def save_dataset(ds: LabeledDataset, path, kind: Optional[str] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + ["label"] + (["kind"] if kind else []))
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)] + ([kind] if kind else []))


# -- standardization ---------------------------------------------------------

@dataclass(frozen=True)
class StandardizationStats:
    means: np.ndarray
    std_devs: np.ndarray
    constant: np.ndarray  # bool mask; these columns map to 0

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        safe = np.where(self.constant, 1.0, self.std_devs)
        Z = (X - self.means) / safe
        Z[:, self.constant] = 0.0
        return Z

    def invert(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        safe = np.where(self.constant, 1.0, self.std_devs)
        return Z * safe + self.means

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "std_devs": self.std_devs.tolist(),
                "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, d) -> "StandardizationStats":
        return cls(np.asarray(d["means"], float), np.asarray(d["std_devs"], float),
                   np.asarray(d["constant"], bool))


def fit_standardization(X, tol: float = 1e-12) -> StandardizationStats:
    """Column means and population standard deviations (divide by N)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise DataError("standardization needs at least 2 rows")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    scale = np.maximum(np.abs(mu), 1.0)
    return StandardizationStats(mu, sd, sd <= tol * scale)


def standardize(ds: LabeledDataset) -> tuple[LabeledDataset, StandardizationStats]:
    stats = fit_standardization(ds.features)
    return ds.with_features(stats.apply(ds.features)), stats


# -- splitting ---------------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    train_indices: np.ndarray
    val_indices: np.ndarray
    test_indices: np.ndarray
    seed: int

    @property
    def fit_indices(self) -> np.ndarray:
        """Train and validation rows together (the 80% outer training set)."""
        return np.sort(np.concatenate([self.train_indices, self.val_indices]))

    def to_dict(self) -> dict:
        return {"seed": self.seed, "train": self.train_indices.tolist(),
                "val": self.val_indices.tolist(), "test": self.test_indices.tolist()}

    @classmethod
    def from_dict(cls, d) -> "SplitPlan":
        return cls(_frozen(d["train"], np.int64), _frozen(d["val"], np.int64),
                   _frozen(d["test"], np.int64), int(d["seed"]))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_split(n: int, seed: int) -> SplitPlan:
    """Random 80/20 train/test split with 20% of the training part held out
    for validation. Indices inside each partition are sorted."""
    if n < 5:
        raise DataError(f"need at least 5 rows to split, got {n}")
    n_test = _round_half_up(TEST_FRACTION * n)
    n_val = _round_half_up(VAL_FRACTION * (n - n_test))
    if n_test < 1 or n_val < 1 or n - n_test - n_val < 1:
        raise DataError(f"n={n} too small for a non-empty three-way split")
    perm = make_rng(seed).permutation(n)
    test = np.sort(perm[:n_test])
    val = np.sort(perm[n_test:n_test + n_val])
    train = np.sort(perm[n_test + n_val:])
    return SplitPlan(_frozen(train, np.int64), _frozen(val, np.int64), _frozen(test, np.int64), int(seed))


# -- synthetic OOD / adversarial batches -------------------------------------

@dataclass(frozen=True)
class SyntheticBatch:
    features: np.ndarray
    kind: str  # "ood" | "adversarial"
    fabricated_outputs: Optional[ClassifierOutput] = None
    source_indices: Optional[np.ndarray] = None  # adversarial only
    true_labels: Optional[np.ndarray] = None  # adversarial only

    @property
    def count(self) -> int:
        return self.features.shape[0]

    def to_dataset(self, num_classes: int, feature_names=()) -> LabeledDataset:
        """View as a dataset for export; OOD rows get label 0."""
        labels = self.true_labels if self.true_labels is not None else np.zeros(self.count, np.int64)
        return LabeledDataset(self.features, labels, num_classes, feature_names)


def synth_ood(count: int, m: int, seed: int) -> SyntheticBatch:
    """``count`` x ``m`` i.i.d. standard-normal rows (in standardized feature space)."""
    if count < 1 or m < 1:
        raise DataError("count and m must be positive")
    X = make_rng(seed).standard_normal((count, m))
    return SyntheticBatch(_frozen(X), "ood")


# logit gap used to fabricate logits consistent with a one-hot softmax
ADVERSARIAL_LOGIT = 50.0


def synth_adversarial(train: LabeledDataset, outputs: ClassifierOutput, count: int,
                      seed: int) -> SyntheticBatch:
    """Copies of correctly classified training rows paired with a fabricated
    classifier output that puts probability 1.0 on a random wrong class."""
    if outputs.n != train.n:
        raise DataError("outputs and training set differ in length")
    K = train.num_classes
    if K < 2:
        raise DataError("adversarial rows need at least two classes")
    correct = np.flatnonzero(outputs.predicted == train.labels)
    if correct.size < count:
        raise DataError(f"only {correct.size} correctly classified training rows, need {count}")
    rng = make_rng(seed)
    src = np.sort(rng.choice(correct, size=count, replace=False))
    true = train.labels[src]
    # uniform over the K-1 wrong classes: draw an offset in [1, K)
    wrong = (true + rng.integers(1, K, size=count)) % K
    soft = np.zeros((count, K))
    soft[np.arange(count), wrong] = 1.0
    logits = np.zeros((count, K))
    logits[np.arange(count), wrong] = ADVERSARIAL_LOGIT
    fab = ClassifierOutput(soft, logits)
    return SyntheticBatch(_frozen(train.features[src]), "adversarial", fab,
                          _frozen(src, np.int64), _frozen(true, np.int64))
