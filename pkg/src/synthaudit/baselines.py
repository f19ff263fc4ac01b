"""Non-shadow privacy baselines: nearest-record comparison and density ratio.

DCR asks, for each training row, whether synthetic data sits closer to it
than held-out data does. DOMIAS scores membership by the log density
ratio between a KDE fitted on synthetic data and one fitted on a broad
reference sample, after one-hot encoding and PCA reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stats import auroc, binomial_test_upper, pairwise_cosine_distances
from .tabular import (
    Table,
    concat_tables,
    encode,
    fit_encoder,
    pca_fit,
    pca_transform,
)

KDE_BANDWIDTH_FLOOR = 1e-6
DOMIAS_VARIANCE_KEEP = 0.99


@dataclass(frozen=True)
class DcrResult:
    fraction: float
    count: int
    total: int
    p_value: float


def dcr_score(train: Table, synth: Table, holdout: Table) -> DcrResult:
    """Fraction of training rows strictly closer to synthetic than to
    held-out data, with a one-sided binomial p-value against chance.

    Distances are cosine distances in the one-hot encoded space, with the
    encoder fitted on the training table. Ties count as not-closer.
    """
    if train.n_rows == 0 or synth.n_rows == 0 or holdout.n_rows == 0:
        raise ValueError("dcr_score needs non-empty train, synth and holdout tables")
    if holdout.n_rows != train.n_rows:
        raise ValueError(
            f"holdout must match the training size: {holdout.n_rows} vs {train.n_rows}")
    enc = fit_encoder(train)
    x_train = encode(train, enc)
    x_synth = encode(synth, enc)
    x_hold = encode(holdout, enc)
    d_synth = pairwise_cosine_distances(x_train, x_synth).min(axis=1)
    d_hold = pairwise_cosine_distances(x_train, x_hold).min(axis=1)
    count = int(np.sum(d_synth < d_hold))
    n = train.n_rows
    return DcrResult(
        fraction=count / n,
        count=count,
        total=n,
        p_value=binomial_test_upper(count, n),
    )


@dataclass(frozen=True)
class KdeModel:
    """Isotropic Gaussian kernel density estimate."""

    points: np.ndarray     # (n, k) reduced data
    bandwidth: float

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def kde_fit(points: np.ndarray) -> KdeModel:
    """Scott's-rule bandwidth: n^(-1/(k+4)) times the mean per-dimension
    standard deviation, floored to stay positive on degenerate data."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] < 1:
        raise ValueError("kde_fit needs at least 2 points of dimension at least 1")
    if not np.all(np.isfinite(points)):
        raise ValueError("kde_fit input must be finite")
    n, k = points.shape
    spread = float(np.std(points, axis=0).mean())
    bandwidth = max(n ** (-1.0 / (k + 4)) * spread, KDE_BANDWIDTH_FLOOR)
    return KdeModel(points=points, bandwidth=bandwidth)


def kde_logpdf(model: KdeModel, x):
    """Log density at x: a single vector gives a float, a matrix gives one
    value per row. Computed in log-sum-exp form."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    queries = x[None, :] if single else x
    if queries.shape[1] != model.dim:
        raise ValueError(
            f"query dimension {queries.shape[1]} does not match model dimension {model.dim}")
    n, k = model.points.shape
    h = model.bandwidth
    norm = -np.log(n) - k * np.log(h) - 0.5 * k * np.log(2.0 * np.pi)
    p_sq = np.sum(model.points ** 2, axis=1)
    out = np.empty(len(queries))
    chunk = 1024
    for start in range(0, len(queries), chunk):
        q = queries[start:start + chunk]
        d_sq = np.maximum(
            np.sum(q ** 2, axis=1)[:, None] + p_sq[None, :] - 2.0 * q @ model.points.T,
            0.0)
        exponents = -d_sq / (2.0 * h * h)
        peak = exponents.max(axis=1, keepdims=True)
        out[start:start + chunk] = (
            peak.ravel() + np.log(np.exp(exponents - peak).sum(axis=1)) + norm)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class DomiasResult:
    auroc: float
    train_scores: np.ndarray
    control_scores: np.ndarray


def _require_disjoint(a: Table, b: Table, what: str) -> None:
    if len(np.intersect1d(a.row_ids, b.row_ids)) > 0:
        raise ValueError(f"{what} must not share row ids")


def domias_score(train: Table, synth: Table, reference: Table, control: Table,
                 variance_keep: float = DOMIAS_VARIANCE_KEEP) -> DomiasResult:
    """Density-ratio membership attack.

    Encoder and PCA are fitted on reference plus synth (the attacker's
    observable data); each record scores logpdf under the synth KDE minus
    logpdf under the reference KDE; the result is the AUROC of those
    scores with training rows labeled 1 and control rows 0.
    """
    for t, name in ((train, "train"), (synth, "synth"),
                    (reference, "reference"), (control, "control")):
        if t.n_rows == 0:
            raise ValueError(f"{name} table is empty")
    _require_disjoint(train, control, "train and control")
    _require_disjoint(reference, train, "reference and train")
    _require_disjoint(reference, control, "reference and control")
    union = concat_tables([reference, synth])
    enc = fit_encoder(union)
    pca = pca_fit(encode(union, enc), variance_keep=variance_keep)
    if pca.components.shape[0] == 0:
        raise ValueError("feature space collapsed to rank 0; no density can be fit")

    def reduce(t: Table) -> np.ndarray:
        return pca_transform(encode(t, enc), pca)

    kde_syn = kde_fit(reduce(synth))
    kde_ref = kde_fit(reduce(reference))
    r_train = reduce(train)
    r_control = reduce(control)
    train_scores = kde_logpdf(kde_syn, r_train) - kde_logpdf(kde_ref, r_train)
    control_scores = kde_logpdf(kde_syn, r_control) - kde_logpdf(kde_ref, r_control)
    scores = np.concatenate([train_scores, control_scores])
    labels = np.concatenate([np.ones(train.n_rows), np.zeros(control.n_rows)])
    return DomiasResult(
        auroc=auroc(scores, labels),
        train_scores=train_scores,
        control_scores=control_scores,
    )
