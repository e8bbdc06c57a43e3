"""Weighted k-NN on Fermat distances, Euclidean k-NN baseline, and CV for sigma.

Tie rules used throughout: neighbors at equal distance are ordered by
smaller index; equal class scores resolve to the smaller class id.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .datagen import rng_for


@dataclass(frozen=True)
class WknnConfig:
    k: int
    sigma: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def default_k(n_labeled: int, n_classes: int, rule: str = "practical") -> int:
    """Neighbor count for the weighted k-NN.

    ``practical``: [n_l / (1.5 K)]; ``theory``: floor(n_l / log n_l).
    Either is clamped to [1, n_l].
    """
    if n_labeled < 1 or n_classes < 2:
        raise ValueError("need n_labeled >= 1 and n_classes >= 2")
    if rule == "practical":
        k = _round_half_up(n_labeled / (1.5 * n_classes))
    elif rule == "theory":
        k = int(n_labeled / math.log(n_labeled)) if n_labeled > 1 else 1
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return min(max(k, 1), n_labeled)


def _vote(labels: np.ndarray, weights: np.ndarray) -> int:
    scores = np.bincount(labels, weights=weights)
    return int(np.argmax(scores))  # first max = smallest class id


def wknn_weights(dist_to_labeled, cfg: WknnConfig) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the k nearest labeled points and their softmin weights."""
    d = np.asarray(dist_to_labeled, dtype=np.float64)
    if d.size == 0:
        raise ValueError("empty labeled set")
    if cfg.k > d.size:
        raise ValueError(f"k={cfg.k} exceeds the {d.size} labeled points")
    order = np.argsort(d, kind="stable")[:cfg.k]
    near = d[order]
    # shifting by the minimum leaves the normalized weights unchanged
    w = np.exp(-(near - near[0]) / cfg.sigma)
    return order, w / w.sum()


def weighted_knn_predict(dist_to_labeled, labels, cfg: WknnConfig) -> int:
    labels = np.asarray(labels, dtype=np.int64)
    d = np.asarray(dist_to_labeled, dtype=np.float64)
    if d.shape != labels.shape:
        raise ValueError("distance and label vectors are not aligned")
    order, w = wknn_weights(d, cfg)
    zero = d[order] == 0
    if zero.any():
        # exact limit: all mass sits on the coincident labeled points
        return _vote(labels[order[zero]], np.ones(int(zero.sum())))
    return _vote(labels[order], w)


def predict_wknn_batch(dist_rows, labels, cfg: WknnConfig) -> np.ndarray:
    """Row-wise weighted k-NN; ``dist_rows`` is (queries x labeled)."""
    rows = np.atleast_2d(np.asarray(dist_rows, dtype=np.float64))
    return np.array([weighted_knn_predict(r, labels, cfg) for r in rows], dtype=np.int64)


def naive_knn_predict(query, train_points, train_labels, k: int) -> int:
    """Unweighted majority vote among the k Euclidean-nearest labeled points."""
    train_points = np.atleast_2d(np.asarray(train_points, dtype=np.float64))
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if len(train_labels) == 0:
        raise ValueError("empty labeled set")
    if not 1 <= k <= len(train_labels):
        raise ValueError(f"k must lie in [1, {len(train_labels)}], got {k}")
    d = cdist(np.asarray(query, dtype=np.float64).reshape(1, -1), train_points)[0]
    order = np.argsort(d, kind="stable")[:k]
    return _vote(train_labels[order], np.ones(k))


def naive_knn_batch(queries, train_points, train_labels, k: int) -> np.ndarray:
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    return np.array([naive_knn_predict(q, train_points, train_labels, k) for q in queries], dtype=np.int64)


# -- cross-validation --------------------------------------------------------

def stratified_folds(labels, folds: int, seed) -> list[np.ndarray]:
    """Split positions 0..n-1 into ``folds`` groups preserving class shares.

    Members of each class are shuffled and dealt round-robin, continuing the
    deal across classes so fold sizes differ by at most one.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = rng_for(seed)
    assign = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        assign[members] = (offset + np.arange(len(members))) % folds
        offset += len(members)
    return [np.flatnonzero(assign == f) for f in range(folds)]


def cv_accuracy(fit_predict, labels, folds: int, seed) -> float:
    """Mean held-out accuracy; ``fit_predict(train_pos, test_pos)`` returns test predictions."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"need at least {folds} labeled points for {folds}-fold CV, got {n}")
    accs = []
    for test in stratified_folds(labels, folds, seed):
        if len(test) == 0:
            warnings.warn("skipping empty CV fold", stacklevel=2)
            continue
        train = np.setdiff1d(np.arange(n), test)
        accs.append(np.mean(fit_predict(train, test) == labels[test]))
    return float(np.mean(accs))


def kth_neighbor_median(labeled_dist, k: int) -> float:
    """Median over labeled points of the distance to their k-th nearest other labeled point."""
    d = np.array(labeled_dist, dtype=np.float64, copy=True)
    np.fill_diagonal(d, np.inf)
    kk = min(k, d.shape[0] - 1)
    return float(np.median(np.sort(d, axis=1)[:, kk - 1]))


def default_sigma_grid(labeled_dist, k: int, size: int = 8) -> np.ndarray:
    m = kth_neighbor_median(labeled_dist, k)
    if not m > 0:
        m = 1.0
    return np.geomspace(0.1 * m, 10.0 * m, size)


def select_sigma_cv(labeled_dist, labels, k: int, grid=None, folds: int = 5, seed=0) -> float:
    """Bandwidth maximizing mean stratified-CV accuracy; ties go to the larger sigma.

    ``labeled_dist`` is the n_l x n_l Fermat distance matrix among labeled points.
    """
    labeled_dist = np.asarray(labeled_dist, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if grid is None:
        grid = default_sigma_grid(labeled_dist, k)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("sigma grid is empty")
    if grid.size == 1:
        return float(grid[0])

    def scorer(sigma):
        def fit_predict(train, test):
            cfg = WknnConfig(min(k, len(train)), sigma)
            return predict_wknn_batch(labeled_dist[np.ix_(test, train)], labels[train], cfg)
        return cv_accuracy(fit_predict, labels, folds, seed)

    best_sigma, best_acc = None, -1.0
    for sigma in np.sort(grid)[::-1]:
        acc = scorer(float(sigma))
        if acc > best_acc:
            best_sigma, best_acc = float(sigma), acc
    return best_sigma


def wknn_transductive(dist, labeled_idx, labels, n_classes: int, k: int | None = None,
                      sigma: float | None = None, grid=None, folds: int = 5, seed=0) -> np.ndarray:
    """Predict every unlabeled point of the pooled sample (sorted index order).

    ``dist`` is the full n x n Fermat matrix; sigma is CV-selected when not given.
    """
    dist = np.asarray(dist)
    labeled_idx = np.asarray(labeled_idx, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    n = dist.shape[0]
    if k is None:
        k = default_k(len(labeled_idx), n_classes)
    if sigma is None:
        sub = dist[np.ix_(labeled_idx, labeled_idx)]
        if len(labeled_idx) >= folds:
            sigma = select_sigma_cv(sub, labels, k, grid=grid, folds=folds, seed=seed)
        else:
            warnings.warn("too few labeled points for CV; using the median-scale sigma", stacklevel=2)
            sigma = float(np.median(default_sigma_grid(sub, k)))
    mask = np.ones(n, dtype=bool)
    mask[labeled_idx] = False
    unlabeled = np.flatnonzero(mask)
    return predict_wknn_batch(dist[np.ix_(unlabeled, labeled_idx)], labels, WknnConfig(k, sigma))
