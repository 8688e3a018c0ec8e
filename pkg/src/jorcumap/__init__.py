"""Curvature- and overlap-aware neighbor-graph embedding.

The pipeline builds a fuzzy k-nearest-neighbor graph, measures Ollivier-Ricci
curvature on every edge via optimal transport, rectifies edge weights using
the curvature sign gated by Jaccard neighborhood overlap, and lays the graph
out in low dimension with negative-sampling SGD.
"""

from .dataio import (
    PointCloud,
    load_csv,
    gen_swiss_roll,
    gen_s_curve,
    gen_trefoil,
    gen_three_rings,
)
from .neighbors import NeighborIndex, FuzzyGraph, knn_exact, knn_approx, fuzzy_weights
from .curvature import (
    LocalMeasure,
    EdgeCurvature,
    SinkhornResult,
    local_measure,
    ground_costs,
    w1_exact,
    w1_sinkhorn,
    edge_curvatures,
)
from .rectify import (
    RectifierConfig,
    StrengthEstimate,
    jaccard,
    dynamic_strength,
    rectified_weights,
    reweight,
)
from .embed import Embedding, LayoutConfig, pca_init, fit_ab, optimize
from .metrics import (
    MetricsReport,
    random_triplet_accuracy,
    centroid_triplet_accuracy,
    knn_classifier_accuracy,
    connectivity_diagnostic,
)
from .pipeline import PipelineConfig, PipelineError, run_pipeline, sweep
from .plotting import plot_scatter

__version__ = "0.1.0"

__all__ = [
    "PointCloud",
    "load_csv",
    "gen_swiss_roll",
    "gen_s_curve",
    "gen_trefoil",
    "gen_three_rings",
    "NeighborIndex",
    "FuzzyGraph",
    "knn_exact",
    "knn_approx",
    "fuzzy_weights",
    "LocalMeasure",
    "EdgeCurvature",
    "SinkhornResult",
    "local_measure",
    "ground_costs",
    "w1_exact",
    "w1_sinkhorn",
    "edge_curvatures",
    "RectifierConfig",
    "StrengthEstimate",
    "jaccard",
    "dynamic_strength",
    "rectified_weights",
    "reweight",
    "Embedding",
    "LayoutConfig",
    "pca_init",
    "fit_ab",
    "optimize",
    "MetricsReport",
    "random_triplet_accuracy",
    "centroid_triplet_accuracy",
    "knn_classifier_accuracy",
    "connectivity_diagnostic",
    "PipelineConfig",
    "PipelineError",
    "run_pipeline",
    "sweep",
    "plot_scatter",
    "__version__",
]
