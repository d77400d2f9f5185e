"""Rank statistics used throughout the toolkit.

Both Spearman correlation and AUC-ROC are computed from average ranks
(ties get the mean of the rank positions they occupy), so they share one
ranking helper and stay consistent with each other.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["average_ranks", "spearman", "auc_roc", "mean_ci95"]


def average_ranks(values) -> np.ndarray:
    """Return 1-based ranks of ``values``; tied entries share the average rank."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    sorted_v = v[order]
    ranks = np.empty(v.size, dtype=float)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(a, b) -> float:
    """Spearman rank correlation of two equal-length sequences.

    Ties receive average ranks. Returns ``nan`` when either sequence is
    constant (the correlation is undefined there); callers that aggregate
    over many pairs should drop the nan results.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"spearman needs two 1-d sequences of equal length, got shapes {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValueError("spearman needs at least 2 paired observations")
    ra = average_ranks(a)
    rb = average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        return float("nan")
    return float(ra @ rb) / denom


def auc_roc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum (Mann-Whitney) statistic.

    Equals P(score of a random positive > score of a random negative) plus
    half the probability of a tie. ``labels`` are booleans with True as the
    positive class; both classes must be present.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"auc_roc needs 1-d scores and labels of equal length, got shapes {s.shape} and {y.shape}")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs at least one positive and one negative label")
    ranks = average_ranks(s)
    rank_sum_pos = float(ranks[y].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def mean_ci95(values) -> tuple[float, float]:
    """Mean and 95% normal-approximation CI half-width (1.96 * sd / sqrt(n)).

    Uses the sample standard deviation (ddof=1); the half-width is 0.0 for a
    single value.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("mean_ci95 needs at least one value")
    mean = float(v.mean())
    if v.size == 1:
        return mean, 0.0
    half = 1.96 * float(v.std(ddof=1)) / math.sqrt(v.size)
    return mean, half
