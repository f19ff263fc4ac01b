"""Statistical kernels shared by the audit metrics.

Everything here is a pure function on numpy arrays: rank-based AUROC,
the one-sided binomial significance test, Spearman correlation, rolling
smoothing for training traces, and the distance helpers used by the
nearest-record and density baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoreSeries:
    """A metric recorded at strictly increasing iteration indices."""

    iterations: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        it = np.asarray(self.iterations, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if len(it) != len(vals):
            raise ValueError("iterations and values must have equal length")
        if len(it) > 1 and not np.all(np.diff(it) > 0):
            raise ValueError("iteration indices must be strictly increasing")
        object.__setattr__(self, "iterations", it)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.iterations)


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    x = np.asarray(x, dtype=np.float64)
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    mean_rank = ends - (counts - 1) / 2.0
    return mean_rank[inverse]


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    if len(scores) == 0:
        raise ValueError("empty input")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def auroc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Ties count half. Computed from the Mann-Whitney U statistic via
    average ranks, so any strictly increasing rescoring leaves the value
    unchanged.
    """
    scores, labels = _check_binary(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs both classes present")
    ranks = average_ranks(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy_at_half(scores, labels) -> tuple[int, int]:
    """Count of correct predictions under the fixed rule: score >= 0.5 means class 1."""
    scores, labels = _check_binary(scores, labels)
    preds = (scores >= 0.5).astype(np.int64)
    return int(np.sum(preds == labels)), len(labels)


def binomial_test_upper(successes: int, trials: int) -> float:
    """One-sided upper tail P(X >= successes) for X ~ Binomial(trials, 1/2).

    Summed in log space so large trial counts stay accurate.
    """
    if trials < 1 or not (0 <= successes <= trials):
        raise ValueError(f"invalid counts: {successes} successes of {trials} trials")
    if successes <= 0:
        return 1.0
    log_half = math.log(0.5)
    log_terms = [
        math.lgamma(trials + 1) - math.lgamma(k + 1) - math.lgamma(trials - k + 1)
        + trials * log_half
        for k in range(successes, trials + 1)
    ]
    peak = max(log_terms)
    return float(math.exp(peak) * sum(math.exp(t - peak) for t in log_terms))


def spearman(x, y) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise ValueError("spearman needs two equal-length lists of at least 3 values")
    if len(np.unique(x)) < 2 or len(np.unique(y)) < 2:
        raise ValueError("spearman is undefined when either list is constant")
    rx = average_ranks(x)
    ry = average_ranks(y)
    return float(np.corrcoef(rx, ry)[0, 1])


def clip_scores(x, floor: float = 0.5) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), floor)


def smoothing_window(n: int, window_fraction: float) -> int:
    """Window size: the given fraction of the series length, rounded half away
    from zero, never below 1."""
    return max(1, int(math.floor(window_fraction * n + 0.5)))


def smooth_centered(series: ScoreSeries, window_fraction: float = 0.10) -> ScoreSeries:
    """Centered rolling mean, truncated at the boundaries.

    Element i averages the raw values at indices [i - w//2, i + ceil(w/2) - 1]
    clipped to the valid range, with w = max(1, round(window_fraction * n)).
    Output keeps the input's iteration indices.
    """
    if len(series) == 0:
        raise ValueError("cannot smooth an empty series")
    if not (0 < window_fraction <= 1):
        raise ValueError(f"window_fraction must lie in (0, 1], got {window_fraction}")
    n = len(series)
    w = smoothing_window(n, window_fraction)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        lo = max(0, i - w // 2)
        hi = min(n, i + (w + 1) // 2)
        out[i] = series.values[lo:hi].mean()
    return ScoreSeries(np.array(series.iterations), out)


def cosine_distance(u, v) -> float:
    """1 minus cosine similarity; a zero vector is treated as distance 1."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("cosine_distance needs two vectors of equal dimension")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 1.0
    return float(1.0 - np.dot(u, v) / (nu * nv))


def pairwise_cosine_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(len(a), len(b)) matrix of cosine distances between rows.

    Zero rows normalize to zero, which yields distance 1 against anything,
    matching cosine_distance's convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("pairwise distances need 2-D inputs with matching width")

    def normalize(m):
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)

    return 1.0 - normalize(a) @ normalize(b).T


def ks_statistic(a, b) -> float:
    """Sup-norm distance between the empirical CDFs of two samples."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("ks_statistic needs two non-empty samples")
    points = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, points, side="right") / len(a)
    cdf_b = np.searchsorted(b, points, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))
