"""Seeded Lloyd k-means with k-means++ seeding and farthest-point reseeding."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` seed rows chosen by D^2 sampling.

    When every remaining squared distance is zero (fewer distinct rows than
    ``k``) the next seed is drawn uniformly.
    """
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            r = rng.random() * total
            nxt = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            nxt = min(nxt, n - 1)
        else:
            nxt = int(rng.integers(n))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return np.array(chosen)


def _reseed_empty(labels, dmin, k):
    """Move the farthest points into empty clusters, never emptying another."""
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if len(empty) == 0:
        return labels
    labels = labels.copy()
    order = np.argsort(-dmin, kind="stable")
    pos = 0
    for e in empty:
        while counts[labels[order[pos]]] <= 1:
            pos += 1
        p = order[pos]
        counts[labels[p]] -= 1
        labels[p] = e
        counts[e] = 1
        pos += 1
    return labels


def _means(X, labels, k):
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums / np.bincount(labels, minlength=k)[:, None]


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 100, tol: float = 1e-6):
    """Alternate assignment and mean updates from ``centers``.

    Stops after ``max_iter`` iterations or once the relative inertia change
    falls below ``tol``. Returns ``(centers, labels, inertia, n_iter)`` where
    ``centers`` are exactly the member means of ``labels``.
    """
    k = len(centers)
    prev = None
    labels = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = cdist(X, centers, "sqeuclidean")
        labels = np.argmin(d, axis=1)
        dmin = d[np.arange(len(X)), labels]
        labels = _reseed_empty(labels, dmin, k)
        centers = _means(X, labels, k)
        inertia = float(((X - centers[labels]) ** 2).sum())
        if prev is not None and abs(prev - inertia) <= tol * prev:
            break
        if inertia == 0.0:
            break
        prev = inertia
    return centers, labels, inertia, n_iter
