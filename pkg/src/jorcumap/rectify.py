"""Jaccard-gated curvature rectification of fuzzy-graph edge weights.

Negative-curvature edges with enough neighborhood overlap are boosted
(manifold skeleton), negative-curvature edges with little overlap are cut to
a floor (noise bridges), and non-negative-curvature edges are mildly
suppressed (cluster interiors).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .curvature import EdgeCurvature
from .neighbors import FuzzyGraph, NeighborIndex

STRENGTH_CLIP = (0.5, 10.0)
STRENGTH_EPS = 1e-8
SPARSE_NEG_SCALE = 1.5  # applied when negative edges are rare
DENSE_NEG_SCALE = 0.8  # applied when negative edges are abundant

BRANCH_BOOST = "boost"
BRANCH_SUPPRESS = "suppress"
BRANCH_CUT = "cut"


@dataclass
class RectifierConfig:
    """Knobs of the three-way reweighting.

    delta is the Jaccard threshold separating skeleton edges from noise
    bridges; an edge with negative curvature is cut when its overlap is <=
    delta (boundary ties go to the cut branch).
    """

    delta: float = 0.1
    eps_floor: float = 1e-5
    s_base: float = 2.0
    beta: float = 0.9
    dynamic_strength: bool = False
    target_tanh: float = 0.9
    ratio_low: float = 0.05
    ratio_high: float = 0.30

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not 0.0 < self.eps_floor < 1.0:
            raise ValueError("eps_floor must lie in (0, 1)")
        if self.s_base <= 0:
            raise ValueError("s_base must be > 0")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not 0.0 < self.target_tanh < 1.0:
            raise ValueError("target_tanh must lie in (0, 1)")


class StrengthEstimate(NamedTuple):
    value: float
    raw: float
    kappa_typ: float
    neg_ratio: float
    fallback: bool


def jaccard(index: NeighborIndex, i: int, j: int) -> float:
    """Overlap |N(i) & N(j)| / |N(i) | N(j)| of the directed kNN sets."""
    if i == j:
        raise ValueError("jaccard needs two distinct nodes")
    a = index.ids[i]
    b = index.ids[j]
    inter = np.intersect1d(a, b, assume_unique=False).size
    union = np.union1d(a, b).size
    return inter / union


def jaccard_many(index: NeighborIndex, ei: np.ndarray, ej: np.ndarray) -> np.ndarray:
    """Jaccard overlap for many (i, j) pairs at once."""
    sets = index.neighbor_sets()
    out = np.empty(len(ei))
    for e in range(len(ei)):
        a, b = sets[ei[e]], sets[ej[e]]
        out[e] = len(a & b) / len(a | b)
    return out


def dynamic_strength(
    curvatures: list[EdgeCurvature], config: RectifierConfig
) -> StrengthEstimate:
    """Estimate the tanh strength so a typical negative curvature maps near
    the target.

    The typical magnitude is the 75th percentile of |kappa| over negative
    edges (linear interpolation); raw strength arctanh(T)/kappa_typ is
    clipped to [0.5, 10], scaled by 1.5 or 0.8 when negative edges are rare
    (< ratio_low of all edges) or abundant (> ratio_high), and re-clipped.
    With no negative edges the base strength is returned with a fallback
    flag.
    """
    kappas = np.array([c.kappa for c in curvatures])
    neg = np.abs(kappas[kappas < 0])
    n_edges = len(kappas)
    if neg.size == 0:
        return StrengthEstimate(config.s_base, config.s_base, 0.0, 0.0, True)
    kappa_typ = float(np.percentile(neg, 75))
    raw = float(np.arctanh(config.target_tanh) / (kappa_typ + STRENGTH_EPS))
    s = float(np.clip(raw, *STRENGTH_CLIP))
    ratio = neg.size / n_edges
    if ratio < config.ratio_low:
        s *= SPARSE_NEG_SCALE
    elif ratio > config.ratio_high:
        s *= DENSE_NEG_SCALE
    s = float(np.clip(s, *STRENGTH_CLIP))
    return StrengthEstimate(s, raw, kappa_typ, ratio, False)


def resolve_strength(
    curvatures: list[EdgeCurvature], config: RectifierConfig
) -> float:
    """The strength actually used: dynamic estimate or the configured base."""
    if config.dynamic_strength:
        return dynamic_strength(curvatures, config).value
    return config.s_base


def rectified_weights(
    w: np.ndarray,
    kappa: np.ndarray,
    jac: np.ndarray,
    delta: float,
    strength: float,
    beta: float,
    eps_floor: float,
) -> np.ndarray:
    """Vectorized three-way reweighting formula.

    boost    (kappa < 0, J > delta):  w + (1 - w) * tanh(S * |kappa|)
    suppress (kappa >= 0):            w * (1 - tanh(S * kappa) * beta)
    cut      (kappa < 0, J <= delta): w * eps_floor
    """
    w = np.asarray(w, dtype=np.float64)
    kappa = np.asarray(kappa, dtype=np.float64)
    jac = np.asarray(jac, dtype=np.float64)
    out = np.where(
        kappa >= 0,
        w * (1.0 - np.tanh(strength * kappa) * beta),
        np.where(
            jac > delta,
            w + (1.0 - w) * np.tanh(strength * np.abs(kappa)),
            w * eps_floor,
        ),
    )
    return out


def edge_branches(kappa: np.ndarray, jac: np.ndarray, delta: float) -> np.ndarray:
    """Branch label per edge: boost / suppress / cut."""
    return np.where(
        kappa >= 0,
        BRANCH_SUPPRESS,
        np.where(jac > delta, BRANCH_BOOST, BRANCH_CUT),
    )


def rectify_edges(
    graph: FuzzyGraph,
    curvatures: list[EdgeCurvature],
    index: NeighborIndex,
    config: RectifierConfig,
    strength: float | None = None,
):
    """Core rectification: returns (new graph, per-edge record rows).

    Fills the ``jaccard`` field of the curvature records in place. Rows are
    (i, j, w, kappa, jaccard, branch, w_new) in edge order.
    """
    by_pair = {(c.i, c.j): c for c in curvatures}
    kappas = np.empty(graph.edge_count)
    for e in range(graph.edge_count):
        key = (int(graph.ei[e]), int(graph.ej[e]))
        if key not in by_pair:
            raise ValueError(f"missing curvature for edge {key}")
        kappas[e] = by_pair[key].kappa

    jac = jaccard_many(index, graph.ei, graph.ej)
    for e in range(graph.edge_count):
        by_pair[(int(graph.ei[e]), int(graph.ej[e]))].jaccard = float(jac[e])

    if strength is None:
        strength = resolve_strength(curvatures, config)
    w_new = rectified_weights(
        graph.w, kappas, jac, config.delta, strength, config.beta, config.eps_floor
    )
    branches = edge_branches(kappas, jac, config.delta)
    rows = [
        (
            int(graph.ei[e]),
            int(graph.ej[e]),
            float(graph.w[e]),
            float(kappas[e]),
            float(jac[e]),
            str(branches[e]),
            float(w_new[e]),
        )
        for e in range(graph.edge_count)
    ]
    new_graph = FuzzyGraph(graph.n, graph.ei.copy(), graph.ej.copy(), w_new)
    return new_graph, rows


def reweight(
    graph: FuzzyGraph,
    curvatures: list[EdgeCurvature],
    index: NeighborIndex,
    config: RectifierConfig,
    strength: float | None = None,
) -> FuzzyGraph:
    """Apply the three-way reweighting; returns a new graph, input untouched."""
    new_graph, _ = rectify_edges(graph, curvatures, index, config, strength)
    return new_graph
