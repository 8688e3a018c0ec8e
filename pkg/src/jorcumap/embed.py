"""PCA initialization and negative-sampling SGD layout of the fuzzy graph.

The layout minimizes the fuzzy cross-entropy between graph weights and the
low-dimensional similarity psi(d) = 1 / (1 + a d^(2b)): sampled edges pull
their endpoints together along grad log(psi), random non-neighbors push the
head away along grad log(1 - psi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import curve_fit

from .dataio import PointCloud
from .neighbors import FuzzyGraph

GRAD_CLIP = 4.0
INIT_SCALE = 10.0  # max |coordinate| after PCA initialization
JITTER_SD = 1e-4  # fills rank-deficient PCA directions
REPULSE_EPS = 0.001  # stabilizes the repulsive coefficient near d = 0
NEG_SAMPLE_RETRIES = 16


@dataclass
class Embedding:
    """Low-dimensional coordinates plus the seed and epochs that made them."""

    coords: np.ndarray
    seed: int = 0
    epochs_run: int = 0

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2:
            raise ValueError("coords must be 2-D")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coords contain non-finite values")

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


@dataclass
class LayoutConfig:
    d: int = 2
    n_epochs: int = 500
    learning_rate: float = 1.0
    min_dist: float = 0.1
    spread: float = 1.0
    negative_sample_rate: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_epochs < 1:
            raise ValueError("n_epochs must be >= 1")
        if self.min_dist <= 0 or self.spread <= 0:
            raise ValueError("min_dist and spread must be > 0")
        if self.negative_sample_rate < 0:
            raise ValueError("negative_sample_rate must be >= 0")


def principal_projection(points: np.ndarray, d: int):
    """Centered top-d PCA scores with a deterministic sign convention.

    Each component is flipped so its largest-magnitude loading is positive.
    Returns (scores, eigenvalues, rank): scores has d columns, the ones past
    the data rank are zero; eigenvalues are all covariance eigenvalues in
    descending order.
    """
    x = np.asarray(points, dtype=np.float64)
    n, dim = x.shape
    if d > dim:
        raise ValueError("target dimension exceeds data dimension")
    if n < d:
        raise ValueError("need at least d points")
    xc = x - x.mean(axis=0)
    u, s, vt = np.linalg.svd(xc, full_matrices=False)
    for c in range(min(d, len(s))):
        imax = int(np.argmax(np.abs(vt[c])))
        if vt[c, imax] < 0:
            vt[c] = -vt[c]
            u[:, c] = -u[:, c]
    rank = int(np.sum(s > (s[0] * 1e-12 if s.size and s[0] > 0 else 0.0)))
    r = min(d, rank)
    scores = np.zeros((n, d))
    scores[:, :r] = u[:, :r] * s[:r]
    eigvals = (s**2) / max(n - 1, 1)
    return scores, eigvals, rank


def pca_init(cloud: PointCloud, d: int, seed: int = 0) -> Embedding:
    """Project onto the top-d principal directions and rescale so the max
    absolute coordinate is 10.

    Directions beyond the data rank are filled with seeded Gaussian jitter
    (sd 1e-4) so the optimizer never starts from exactly coincident columns.
    """
    scores, _, rank = principal_projection(cloud.points, d)
    if rank < d:
        rng = np.random.default_rng(seed)
        scores[:, rank:] = rng.normal(0.0, JITTER_SD, size=(cloud.n, d - rank))
    mx = np.max(np.abs(scores))
    if mx > 0:
        scores *= INIT_SCALE / mx
    return Embedding(scores, seed=seed, epochs_run=0)


def fit_ab(min_dist: float, spread: float) -> tuple[float, float]:
    """Least-squares (a, b) so that 1/(1 + a x^(2b)) tracks the target curve
    (1 up to min_dist, then exponential decay with the given spread)."""
    if min_dist <= 0 or spread <= 0:
        raise ValueError("min_dist and spread must be > 0")
    xv = np.linspace(0.0, spread * 3.0, 300)
    yv = np.where(xv <= min_dist, 1.0, np.exp(-(xv - min_dist) / spread))

    def psi(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    (a, b), _ = curve_fit(psi, xv, yv)
    return float(a), float(b)


def attractive_loss(yi, yj, a: float, b: float) -> float:
    """-log psi(d): the cross-entropy term of an edge with weight 1."""
    d2 = float(np.sum((np.asarray(yi) - np.asarray(yj)) ** 2))
    return float(np.log1p(a * d2**b))


def attractive_gradient(yi, yj, a: float, b: float) -> np.ndarray:
    """Gradient of the attractive loss with respect to yi."""
    diff = np.asarray(yi, dtype=float) - np.asarray(yj, dtype=float)
    d2 = float(np.sum(diff**2))
    if d2 == 0.0:
        return np.zeros_like(diff)
    coef = 2.0 * a * b * d2 ** (b - 1.0) / (1.0 + a * d2**b)
    return coef * diff


def repulsive_loss(yi, yj, a: float, b: float) -> float:
    """-log(1 - psi(d)): the cross-entropy term of a non-edge."""
    d2 = float(np.sum((np.asarray(yi) - np.asarray(yj)) ** 2))
    return float(np.log1p(a * d2**b) - np.log(a) - b * np.log(d2))


def repulsive_gradient(yi, yj, a: float, b: float) -> np.ndarray:
    """Gradient of the repulsive loss with respect to yi."""
    diff = np.asarray(yi, dtype=float) - np.asarray(yj, dtype=float)
    d2 = float(np.sum(diff**2))
    coef = -2.0 * b / (d2 * (1.0 + a * d2**b))
    return coef * diff


def make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    """Epochs between samples of each edge, proportional to 1/weight.

    The heaviest edge is sampled every epoch; an edge lighter than
    max_weight / n_epochs is never sampled.
    """
    weights = np.asarray(weights, dtype=np.float64)
    return weights.max() / weights


@numba.njit(cache=True)
def _next_u64(state):
    state[0] = state[0] * np.uint64(6364136223846793005) + np.uint64(1442695040888963407)
    return state[0]


@numba.njit(cache=True)
def _is_neighbor(indptr, indices, i, cand):
    lo = indptr[i]
    hi = indptr[i + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        v = indices[mid]
        if v == cand:
            return True
        if v < cand:
            lo = mid + 1
        else:
            hi = mid
    return False


@numba.njit(cache=True)
def _layout_kernel(
    coords,
    head,
    tail,
    eps,
    eps_neg,
    n_epochs,
    lr0,
    a,
    b,
    neg_rate,
    indptr,
    indices,
    rng_state,
):
    n = coords.shape[0]
    dim = coords.shape[1]
    # the heaviest edge fires first at epoch 0; an edge with eps > n_epochs
    # never fires
    next_sample = eps - 1.0
    next_neg = eps_neg - 1.0
    for epoch in range(n_epochs):
        lr = lr0 * (1.0 - epoch / n_epochs)
        for e in range(head.shape[0]):
            if next_sample[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            d2 = 0.0
            for d in range(dim):
                diff = coords[i, d] - coords[j, d]
                d2 += diff * diff
            if d2 > 0.0:
                coef = -2.0 * a * b * d2 ** (b - 1.0) / (1.0 + a * d2**b)
                for d in range(dim):
                    grad = coef * (coords[i, d] - coords[j, d])
                    if grad > GRAD_CLIP:
                        grad = GRAD_CLIP
                    elif grad < -GRAD_CLIP:
                        grad = -GRAD_CLIP
                    coords[i, d] += lr * grad
                    coords[j, d] -= lr * grad
            next_sample[e] += eps[e]

            if neg_rate > 0:
                n_neg = int((epoch - next_neg[e]) / eps_neg[e])
                for _ in range(n_neg):
                    k = np.int64(-1)
                    for _ in range(NEG_SAMPLE_RETRIES):
                        cand = np.int64(
                            (_next_u64(rng_state) >> np.uint64(33)) % np.uint64(n)
                        )
                        if cand != i and not _is_neighbor(indptr, indices, i, cand):
                            k = cand
                            break
                    if k < 0:
                        continue
                    d2 = 0.0
                    for d in range(dim):
                        diff = coords[i, d] - coords[k, d]
                        d2 += diff * diff
                    if d2 > 0.0:
                        coef = 2.0 * b / ((REPULSE_EPS + d2) * (1.0 + a * d2**b))
                        for d in range(dim):
                            grad = coef * (coords[i, d] - coords[k, d])
                            if grad > GRAD_CLIP:
                                grad = GRAD_CLIP
                            elif grad < -GRAD_CLIP:
                                grad = -GRAD_CLIP
                            coords[i, d] += lr * grad
                    else:
                        # coincident negative pair: kick apart at full clip
                        for d in range(dim):
                            coords[i, d] += lr * GRAD_CLIP
                next_neg[e] += n_neg * eps_neg[e]
        for v in range(n):
            for d in range(dim):
                if not np.isfinite(coords[v, d]):
                    return epoch, v
    return -1, -1


def optimize(graph: FuzzyGraph, init: Embedding, config: LayoutConfig) -> Embedding:
    """Run the single-threaded deterministic SGD layout.

    Each directed edge is sampled with frequency proportional to its weight;
    every positive sample triggers ``negative_sample_rate`` repulsive updates
    against uniformly drawn non-neighbors of the head. Per-component
    gradients are clipped to 4 and the learning rate decays linearly to 0.
    """
    if graph.n != init.n:
        raise ValueError("graph and initialization sizes differ")
    coords = init.coords.copy()

    head = np.concatenate((graph.ei, graph.ej))
    tail = np.concatenate((graph.ej, graph.ei))
    w2 = np.concatenate((graph.w, graph.w))
    eps = make_epochs_per_sample(w2, config.n_epochs)
    rate = max(config.negative_sample_rate, 1)
    eps_neg = eps / rate
    indptr, indices, _ = graph.adjacency()

    mixed = (config.seed * 0x9E3779B97F4A7C15 + 1) % (1 << 64)
    state = np.array([mixed], dtype=np.uint64)
    bad_epoch, bad_vertex = _layout_kernel(
        coords,
        head,
        tail,
        eps,
        eps_neg,
        config.n_epochs,
        config.learning_rate,
        *fit_ab(config.min_dist, config.spread),
        config.negative_sample_rate,
        indptr,
        indices,
        state,
    )
    if bad_epoch >= 0:
        raise RuntimeError(
            f"non-finite coordinate at epoch {bad_epoch}, vertex {bad_vertex}"
        )
    return Embedding(coords, seed=config.seed, epochs_run=config.n_epochs)
