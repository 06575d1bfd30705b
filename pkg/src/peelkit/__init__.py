"""Peels and peel neighborhoods of finite metric spaces of strict negative type."""
from .metric import (MetricKind, PointCloud, SntCertificate, classical_mds, convex_hull_2d,
                     is_strict_negative_type, operator_norm, pairwise_distances)
from .peel import (PeelDistribution, PeelError, diversity, model_distance_matrix, ned, peel,
                   peel_layers, quadratic_entropy, similarity_matrix, weighting)
from .neighborhoods import (NeighborIndex, PeelNeighborhood, ThresholdPolicy, all_neighborhoods,
                            default_radial_threshold, peel_neighborhood)

__version__ = "0.1.0"

__all__ = [
    "MetricKind", "PointCloud", "SntCertificate", "classical_mds", "convex_hull_2d", "is_strict_negative_type",
    "operator_norm", "pairwise_distances", "PeelDistribution", "PeelError", "diversity", "model_distance_matrix",
    "ned", "peel", "peel_layers", "quadratic_entropy", "similarity_matrix", "weighting", "NeighborIndex",
    "PeelNeighborhood", "ThresholdPolicy", "all_neighborhoods", "default_radial_threshold", "peel_neighborhood",
]
