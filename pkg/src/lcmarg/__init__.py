"""Marginals of log-concave measures: Grassmannian geometry, centroid bodies and isotropic constants."""

__version__ = "0.1.0"

from .grassmann import (
    Rotation, Subspace, ball_measure_estimate, ball_sample, distance, haar_sample, metric_d,
    principal_angles, sigma_inf,
)
from .measures import Measure, builtin, gaussian_smoothing, marginal, parse_measure, product
from .geometry import ConvexBody, ZqBody, volume_exact, volume_sandwich
from .estimators import isotropic_constant_density, isotropic_constant_volumetric, marginal_L
from .records import EstimateWithCI, RunLog
from .search import SearchConfig, deviation_profile, neighborhood_search

__all__ = [
    "ConvexBody", "EstimateWithCI", "Measure", "Rotation", "RunLog", "SearchConfig", "Subspace", "ZqBody",
    "ball_measure_estimate", "ball_sample", "builtin", "deviation_profile", "distance", "gaussian_smoothing",
    "haar_sample", "isotropic_constant_density", "isotropic_constant_volumetric", "marginal", "marginal_L",
    "metric_d", "neighborhood_search", "parse_measure", "principal_angles", "product", "sigma_inf",
    "volume_exact", "volume_sandwich",
]
