"""k-nearest-neighbor search and the fuzzy weighted neighbor graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import PointCloud

SIGMA_LO = 1e-8
SIGMA_TOL = 1e-5
SIGMA_MAX_ITER = 64
APPROX_EXACT_CUTOFF = 512  # below this size the approximate search is exact


@dataclass
class NeighborIndex:
    """Per-point neighbor ids and distances, ordered by ascending distance."""

    k: int
    ids: np.ndarray
    dists: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.dists = np.asarray(self.dists, dtype=np.float64)
        n = self.ids.shape[0]
        if self.ids.shape != (n, self.k) or self.dists.shape != (n, self.k):
            raise ValueError("ids and dists must both be N x k")
        if np.any((self.ids < 0) | (self.ids >= n)):
            raise ValueError("neighbor id out of range")
        if np.any(self.ids == np.arange(n)[:, None]):
            raise ValueError("self-neighbor found")
        if not np.all(np.isfinite(self.dists)) or np.any(self.dists < 0):
            raise ValueError("distances must be finite and >= 0")
        if np.any(np.diff(self.dists, axis=1) < 0):
            raise ValueError("distances must be non-decreasing per row")

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    def neighbor_sets(self) -> list[frozenset]:
        """Directed kNN sets, one per point."""
        return [frozenset(row) for row in self.ids]


@dataclass
class FuzzyGraph:
    """Symmetric weighted graph stored once per unordered pair (i < j).

    Weights live in (0, 1]. Edges are kept in lexicographic (i, j) order so
    that downstream per-edge results line up deterministically.
    """

    n: int
    ei: np.ndarray
    ej: np.ndarray
    w: np.ndarray
    _indptr: np.ndarray | None = field(default=None, repr=False, compare=False)
    _indices: np.ndarray | None = field(default=None, repr=False, compare=False)
    _data: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.ei = np.asarray(self.ei, dtype=np.int64)
        self.ej = np.asarray(self.ej, dtype=np.int64)
        self.w = np.asarray(self.w, dtype=np.float64)
        if not (self.ei.shape == self.ej.shape == self.w.shape):
            raise ValueError("edge arrays must have equal length")
        if np.any(self.ei >= self.ej):
            raise ValueError("edges must satisfy i < j")
        if np.any((self.ei < 0) | (self.ej >= self.n)):
            raise ValueError("edge endpoint out of range")
        if np.any((self.w <= 0) | (self.w > 1)):
            raise ValueError("weights must lie in (0, 1]")
        keys = self.ei * self.n + self.ej
        if np.any(np.diff(keys) <= 0):
            order = np.argsort(keys, kind="stable")
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate edges")
            self.ei, self.ej, self.w = self.ei[order], self.ej[order], self.w[order]

    @classmethod
    def from_edges(cls, n: int, i, j, w) -> "FuzzyGraph":
        """Build from unordered endpoint arrays, normalizing to i < j."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        w = np.asarray(w, dtype=np.float64)
        if np.any(i == j):
            raise ValueError("self-loops are not allowed")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        return cls(n, lo, hi, w)

    @property
    def edge_count(self) -> int:
        return len(self.w)

    def _build_adjacency(self):
        both_i = np.concatenate((self.ei, self.ej))
        both_j = np.concatenate((self.ej, self.ei))
        both_w = np.concatenate((self.w, self.w))
        order = np.lexsort((both_j, both_i))
        both_i, both_j, both_w = both_i[order], both_j[order], both_w[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, both_i + 1, 1)
        np.cumsum(indptr, out=indptr)
        self._indptr, self._indices, self._data = indptr, both_j, both_w

    def adjacency(self):
        """CSR-style (indptr, indices, data) over both edge directions."""
        if self._indptr is None:
            self._build_adjacency()
        return self._indptr, self._indices, self._data

    def neighbors(self, node: int):
        """Neighbor ids and weights of one node (sorted by id)."""
        indptr, indices, data = self.adjacency()
        lo, hi = indptr[node], indptr[node + 1]
        return indices[lo:hi], data[lo:hi]

    def to_csr(self):
        """Symmetric scipy CSR matrix of the weights (a copy; safe to
        mutate)."""
        import scipy.sparse as sp

        indptr, indices, data = self.adjacency()
        return sp.csr_matrix(
            (data.copy(), indices.copy(), indptr.copy()), shape=(self.n, self.n)
        )

    def edge_lookup(self) -> dict:
        """Map (i, j) with i < j to the edge's position in the arrays."""
        return {(int(a), int(b)): p for p, (a, b) in enumerate(zip(self.ei, self.ej))}


def knn_exact(cloud: PointCloud, k: int) -> NeighborIndex:
    """Exact Euclidean k nearest neighbors; distance ties break toward the
    lower index."""
    n = cloud.n
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    x = cloud.points
    ids = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    chunk = max(1, min(n, int(4e6 // max(n, 1)) or 1))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = cdist(x[start:stop], x)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps index order within exact distance ties
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        ids[start:stop] = order
        dists[start:stop] = np.take_along_axis(d, order, axis=1)
    return NeighborIndex(k, ids, dists)


def knn_approx(cloud: PointCloud, k: int, seed: int = 0) -> NeighborIndex:
    """Approximate neighbors via a random-projection-tree forest plus
    neighbor-of-neighbor refinement.

    Small inputs (N <= 512) fall back to the exact search. Deterministic for
    a fixed seed; recall is measured on fixtures, not guaranteed.
    """
    n = cloud.n
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    if n <= APPROX_EXACT_CUTOFF:
        return knn_exact(cloud, k)

    x = cloud.points
    rng = np.random.default_rng(seed)
    leaf_size = max(2 * k, 32)
    n_trees = 8

    candidates = [set() for _ in range(n)]
    for _ in range(n_trees):
        stack = [np.arange(n)]
        while stack:
            subset = stack.pop()
            if len(subset) <= leaf_size:
                members = subset.tolist()
                for i in members:
                    candidates[i].update(members)
                continue
            a, b = rng.choice(subset, size=2, replace=False)
            direction = x[a] - x[b]
            norm = np.linalg.norm(direction)
            if norm < 1e-12:
                # coincident pivots: split arbitrarily in half
                half = len(subset) // 2
                stack.append(subset[:half])
                stack.append(subset[half:])
                continue
            proj = x[subset] @ (direction / norm)
            thr = np.median(proj)
            left = subset[proj < thr]
            right = subset[proj >= thr]
            if len(left) == 0 or len(right) == 0:
                half = len(subset) // 2
                left, right = subset[:half], subset[half:]
            stack.append(left)
            stack.append(right)

    def best_k(i, cand):
        cand = np.fromiter((c for c in cand if c != i), dtype=np.int64)
        d = np.linalg.norm(x[cand] - x[i], axis=1)
        order = np.lexsort((cand, d))[:k]
        return cand[order], d[order]

    ids = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    for i in range(n):
        ids[i], dists[i] = best_k(i, candidates[i])

    for _ in range(2):  # neighbor-of-neighbor refinement
        new_ids = np.empty_like(ids)
        new_dists = np.empty_like(dists)
        for i in range(n):
            cand = set(ids[i])
            for j in ids[i]:
                cand.update(ids[j])
            new_ids[i], new_dists[i] = best_k(i, cand)
        ids, dists = new_ids, new_dists

    return NeighborIndex(k, ids, dists)


def smooth_knn_sigmas(index: NeighborIndex):
    """Solve per-point bandwidths so each row's fuzzy membership sums to
    log2(k).

    Returns (rho, sigma, residual): rho is the nearest-neighbor distance,
    sigma the bisection solution on [1e-8, k * max row distance], residual
    the final |sum - log2(k)| per row (rows whose target is unreachable,
    e.g. all-equal distances, converge to a bracket end).
    """
    d = index.dists
    n, k = d.shape
    target = np.log2(k)
    rho = d[:, 0].copy()
    gaps = np.maximum(d - rho[:, None], 0.0)

    lo = np.full(n, SIGMA_LO)
    hi = np.maximum(d[:, -1] * k, SIGMA_LO * 2)
    sigma = 0.5 * (lo + hi)
    for _ in range(SIGMA_MAX_ITER):
        val = np.exp(-gaps / sigma[:, None]).sum(axis=1)
        err = val - target
        done = np.abs(err) <= SIGMA_TOL
        if done.all():
            break
        too_big = err > 0
        hi = np.where(too_big & ~done, sigma, hi)
        lo = np.where(~too_big & ~done, sigma, lo)
        sigma = np.where(done, sigma, 0.5 * (lo + hi))
    residual = np.abs(np.exp(-gaps / sigma[:, None]).sum(axis=1) - target)
    return rho, sigma, residual


def fuzzy_weights(index: NeighborIndex) -> FuzzyGraph:
    """Turn a neighbor index into the symmetric fuzzy membership graph.

    Directed strengths a_ij = exp(-max(0, d_ij - rho_i) / sigma_i) are
    symmetrized with the probabilistic t-conorm, computed as
    w = 1 - (1 - a_ij)(1 - a_ji) so that a nearest-neighbor direction
    (a = 1) yields w = 1 exactly. Zero-weight results (possible only via
    floating-point underflow of both directions) are dropped.
    """
    rho, sigma, _ = smooth_knn_sigmas(index)
    n, k = index.ids.shape
    gaps = np.maximum(index.dists - rho[:, None], 0.0)
    a = np.exp(-gaps / sigma[:, None])

    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = index.ids.ravel()
    vals = a.ravel()
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    keys = lo * n + hi
    uniq, inverse = np.unique(keys, return_inverse=True)
    anti = np.ones(len(uniq))
    np.multiply.at(anti, inverse, 1.0 - vals)
    w = 1.0 - anti
    keep = w > 0
    return FuzzyGraph(n, (uniq // n)[keep], (uniq % n)[keep], w[keep])
