"""Paired significance tests and rank aggregation across datasets."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr, stdtr
from scipy.stats import rankdata

from .errors import DataError

EXACT_WILCOXON_MAX_N = 25


class TestResult(NamedTuple):
    statistic: float
    pvalue: float
    degenerate: bool = False


def _paired_diffs(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DataError("paired samples differ in length")
    if a.size < 2:
        raise DataError("paired tests need at least 2 pairs")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("paired samples must be finite")
    return a - b


def paired_t_test(a, b) -> TestResult:
    """Two-sided paired t-test on ``a - b`` with n - 1 degrees of freedom.

    Zero spread: identical pairs give p = 1; a constant nonzero shift gives
    p = 0. Both are flagged ``degenerate``.
    """
    d = _paired_diffs(a, b)
    n = d.size
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0 or not np.isfinite(mean / sd):
        if mean == 0:
            return TestResult(0.0, 1.0, True)
        return TestResult(float(np.copysign(np.inf, mean)), 0.0, True)
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * stdtr(n - 1, -abs(t))
    return TestResult(float(t), float(min(1.0, p)), False)


def _signed_rank_null(doubled_ranks: np.ndarray) -> np.ndarray:
    """Counts of each achievable sum of (doubled) ranks over all sign patterns."""
    counts = np.zeros(int(doubled_ranks.sum()) + 1, dtype=np.int64)  # 2**25 fits
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:counts.size - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a, b) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on ``a - b``.

    Zero differences are dropped and tied magnitudes share the average rank.
    The null distribution is exact up to 25 nonzero pairs, otherwise a
    normal approximation with tie-corrected variance (no continuity
    correction). The statistic is the positive rank sum.
    """
    d = _paired_diffs(a, b)
    d = d[d != 0]
    n = d.size
    if n == 0:
        return TestResult(0.0, 1.0, True)
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_WILCOXON_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _signed_rank_null(doubled)
        w2 = int(np.rint(2 * w_plus))
        total = 2 ** n
        lower = int(counts[: w2 + 1].sum())
        upper = int(counts[w2:].sum())
        p = min(1.0, 2.0 * min(lower, upper) / total)
        return TestResult(w_plus, float(p), False)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    z = (w_plus - mean) / np.sqrt(var)
    return TestResult(w_plus, float(min(1.0, 2.0 * ndtr(-abs(z)))), False)


def mean_rank(table, higher_is_better: bool = True):
    """Mean and standard deviation of per-dataset method ranks.

    ``table`` is (datasets x methods); rows containing NaN are skipped.
    Ties share the average rank. Returns ``(means, stds, n_used)``.
    """
    T = np.asarray(table, dtype=float)
    if T.ndim != 2 or T.shape[1] < 2:
        raise DataError("mean_rank needs a (datasets x methods) table with >= 2 methods")
    rows = T[np.all(np.isfinite(T), axis=1)]
    if rows.shape[0] == 0:
        raise DataError("no dataset has a value for every method")
    ranks = np.array([rankdata(-r if higher_is_better else r) for r in rows])
    std = ranks.std(axis=0, ddof=1) if ranks.shape[0] > 1 else np.zeros(T.shape[1])
    return ranks.mean(axis=0), std, int(rows.shape[0])


def significant(a, b, alpha: float = 0.05, rule: str = "either") -> bool:
    """Whether the paired difference is significant: under at least one of
    the two tests (``"either"``) or under both (``"both"``)."""
    pt = paired_t_test(a, b).pvalue < alpha
    pw = wilcoxon_signed_rank(a, b).pvalue < alpha
    if rule == "either":
        return pt or pw
    if rule == "both":
        return pt and pw
    raise ValueError(f"unknown rule {rule!r}")


def compare_pair(a, b, alpha: float = 0.05, rule: str = "either", higher_is_better: bool = True) -> int:
    """+1 if ``a`` is significantly better than ``b``, -1 if worse, 0 otherwise."""
    d = _paired_diffs(a, b)
    mean = d.mean() if higher_is_better else -d.mean()
    if mean == 0 or not significant(a, b, alpha, rule):
        return 0
    return 1 if mean > 0 else -1


def win_tie_loss(samples: Sequence, alpha: float = 0.05, rule: str = "either",
                 higher_is_better: bool = True):
    """Tally (wins, ties, losses) of method A against B over datasets.

    ``samples`` holds one ``(a_runs, b_runs)`` pair per dataset. Runs where
    either value is NaN are dropped; datasets left with fewer than two runs
    are not counted.
    """
    w = t = l = 0
    for a, b in samples:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        keep = np.isfinite(a) & np.isfinite(b)
        if keep.sum() < 2:
            continue
        res = compare_pair(a[keep], b[keep], alpha, rule, higher_is_better)
        if res > 0:
            w += 1
        elif res < 0:
            l += 1
        else:
            t += 1
    return w, t, l
