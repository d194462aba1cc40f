from services.geometry.feature_io import load_features, save_features
from services.geometry.hypersphere import (
    AngleMatrix,
    CosineMatrix,
    FeatureMatrix,
    NormalizedFeatureMatrix,
    angle_matrix,
    cosine_matrix,
    min_pairwise_angle,
    nearest_angles,
    normalize,
    off_diagonal_cosine_stats,
    pairwise_angles,
)

__all__ = [
    "AngleMatrix",
    "CosineMatrix",
    "FeatureMatrix",
    "NormalizedFeatureMatrix",
    "angle_matrix",
    "cosine_matrix",
    "load_features",
    "min_pairwise_angle",
    "nearest_angles",
    "normalize",
    "off_diagonal_cosine_stats",
    "pairwise_angles",
    "save_features",
]
