"""Embedding-quality metrics and structural diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .dataio import PointCloud
from .embed import Embedding
from .neighbors import knn_exact

CTE_EXHAUSTIVE_MAX_CLASSES = 30
DEFAULT_TRIPLET_REPEATS = 5
DEFAULT_TRIPLETS_PER_POINT = 5


@dataclass
class MetricsReport:
    """Bundle of embedding scores; ``to_json`` uses stable field names."""

    rte: float
    rte_stddev: float
    cte: float | None
    knn_acc: float | None
    components: int
    largest_fraction: float
    params: dict

    def to_json(self) -> str:
        obj = asdict(self)
        return json.dumps(obj, sort_keys=True, indent=2)


def _sample_triplets(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    """Uniform triplets with three distinct indices."""
    trip = rng.integers(0, n, size=(count, 3))
    bad = (
        (trip[:, 0] == trip[:, 1])
        | (trip[:, 0] == trip[:, 2])
        | (trip[:, 1] == trip[:, 2])
    )
    while bad.any():
        trip[bad] = rng.integers(0, n, size=(int(bad.sum()), 3))
        bad = (
            (trip[:, 0] == trip[:, 1])
            | (trip[:, 0] == trip[:, 2])
            | (trip[:, 1] == trip[:, 2])
        )
    return trip


def _order_agreement(hi: np.ndarray, lo: np.ndarray, trip: np.ndarray) -> np.ndarray:
    """Whether d(i,j) vs d(i,k) orders the same way in both spaces.

    Exact distance ties count as agreement.
    """
    i, j, k = trip[:, 0], trip[:, 1], trip[:, 2]
    dh = np.linalg.norm(hi[i] - hi[j], axis=1) - np.linalg.norm(hi[i] - hi[k], axis=1)
    dl = np.linalg.norm(lo[i] - lo[j], axis=1) - np.linalg.norm(lo[i] - lo[k], axis=1)
    sh, sl = np.sign(dh), np.sign(dl)
    return (sh == sl) | (sh == 0) | (sl == 0)


def random_triplet_accuracy(
    cloud: PointCloud,
    emb: Embedding,
    n_triplets: int | None = None,
    repeats: int = DEFAULT_TRIPLET_REPEATS,
    seed: int = 0,
) -> tuple[float, float]:
    """Fraction of random triplets whose relative distance order survives the
    embedding.

    Draws ``repeats`` independent batches (default 5N triplets each) and
    returns their mean and standard deviation.
    """
    n = cloud.n
    if n < 3:
        raise ValueError("need at least 3 points")
    if emb.n != n:
        raise ValueError("embedding size does not match cloud")
    if n_triplets is None:
        n_triplets = DEFAULT_TRIPLETS_PER_POINT * n
    if n_triplets < 1 or repeats < 1:
        raise ValueError("n_triplets and repeats must be >= 1")
    vals = np.empty(repeats)
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        trip = _sample_triplets(rng, n, n_triplets)
        vals[r] = _order_agreement(cloud.points, emb.coords, trip).mean()
    return float(vals.mean()), float(vals.std())


def _centroids(points: np.ndarray, labels: np.ndarray):
    classes = np.unique(labels)
    cents = np.vstack([points[labels == c].mean(axis=0) for c in classes])
    return classes, cents


def centroid_triplet_accuracy(cloud: PointCloud, emb: Embedding, seed: int = 0) -> float:
    """Distance-order agreement over class-centroid triplets.

    All ordered triplets (anchor; b, c) are enumerated when there are at most
    30 classes; otherwise 10 * c^2 random triplets are sampled.
    """
    if cloud.labels is None:
        raise ValueError("centroid metric needs labels")
    classes, hi = _centroids(cloud.points, cloud.labels)
    _, lo = _centroids(emb.coords, cloud.labels)
    c = len(classes)
    if c < 3:
        raise ValueError("need at least 3 distinct classes")
    if c <= CTE_EXHAUSTIVE_MAX_CLASSES:
        trip = np.array(
            [
                (a, b, d)
                for a in range(c)
                for b in range(c)
                for d in range(c)
                if a != b and a != d and b != d
            ],
            dtype=np.int64,
        )
    else:
        rng = np.random.default_rng(seed)
        trip = _sample_triplets(rng, c, 10 * c * c)
    return float(_order_agreement(hi, lo, trip).mean())


def knn_classifier_accuracy(
    emb: Embedding,
    labels: np.ndarray,
    k: int = 5,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Stratified cross-validated majority-vote kNN accuracy in the embedding.

    k is capped at the training-set size per fold; vote ties break toward the
    smaller class id. Raises if any class has fewer members than folds.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = emb.n
    if labels.shape != (n,):
        raise ValueError("labels must match embedding rows")
    if k < 1 or folds < 2:
        raise ValueError("need k >= 1 and folds >= 2")
    labels = labels - labels.min()  # bincount needs non-negative ids
    classes = np.unique(labels)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if len(idx) < folds:
            raise ValueError(f"class {c} has {len(idx)} members < {folds} folds")
        rng.shuffle(idx)
        fold_of[idx] = np.arange(len(idx)) % folds

    x = emb.coords
    correct = 0
    for f in range(folds):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        kk = min(k, len(train))
        d = np.linalg.norm(x[test][:, None, :] - x[train][None, :, :], axis=2)
        order = np.argsort(d, axis=1, kind="stable")[:, :kk]
        votes = labels[train][order]
        for row, true in zip(votes, labels[test]):
            counts = np.bincount(row, minlength=classes.max() + 1)
            pred = int(np.argmax(counts))  # argmax takes the smallest id on ties
            correct += int(pred == true)
    return correct / n


def connectivity_diagnostic(emb: Embedding, k: int = 10) -> tuple[int, float]:
    """Component count and largest-component fraction of the embedding's
    union-symmetrized kNN graph."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = emb.n
    if n == 1:
        return 1, 1.0
    index = knn_exact(PointCloud(emb.coords), min(k, n - 1))
    rows = np.repeat(np.arange(n), index.k)
    cols = index.ids.ravel()
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    adj = adj + adj.T  # union symmetrization
    n_comp, assign = connected_components(adj, directed=False)
    largest = int(np.bincount(assign).max())
    return int(n_comp), largest / n
