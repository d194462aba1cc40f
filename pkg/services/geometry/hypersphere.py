"""
Dense feature matrices on the unit hypersphere: normalization, pairwise cosine and angle kernels
"""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from services.errors import TooFewPoints, ZeroNormRow

ROW_NORM_FLOOR = 1e-12
CLAMP_EPS = 1e-7
SYMMETRY_TOL = 1e-12
ANGLE_SYMMETRY_TOL = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureMatrix:
    """N x D class feature matrix (one row per class)"""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"FeatureMatrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 2:
            raise TooFewPoints(data.shape[0])
        if data.shape[1] < 1:
            raise ValueError("FeatureMatrix needs at least one column")
        if not np.all(np.isfinite(data)):
            raise ValueError("FeatureMatrix entries must be finite")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def n_classes(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class NormalizedFeatureMatrix:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"NormalizedFeatureMatrix must be 2-D, got shape {data.shape}")
        norms = np.linalg.norm(data, axis=1)
        if not np.all(np.abs(norms - 1.0) <= ROW_NORM_FLOOR):
            raise ValueError("rows of a NormalizedFeatureMatrix must have unit L2 norm")
        object.__setattr__(self, "data", _frozen(data))


@dataclass(frozen=True)
class CosineMatrix:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"CosineMatrix must be square, got shape {data.shape}")
        if np.max(np.abs(data - data.T), initial=0.0) > SYMMETRY_TOL:
            raise ValueError("CosineMatrix must be symmetric")
        if np.max(np.abs(np.diag(data) - 1.0), initial=0.0) > SYMMETRY_TOL:
            raise ValueError("CosineMatrix diagonal must be 1")
        if np.any(data < -1.0) or np.any(data > 1.0):
            raise ValueError("CosineMatrix entries must lie in [-1, 1]")
        object.__setattr__(self, "data", _frozen(data))


@dataclass(frozen=True)
class AngleMatrix:
    """Pairwise angles in radians"""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"AngleMatrix must be square, got shape {data.shape}")
        if np.max(np.abs(data - data.T), initial=0.0) > ANGLE_SYMMETRY_TOL:
            raise ValueError("AngleMatrix must be symmetric")
        if np.any(np.diag(data) != 0.0):
            raise ValueError("AngleMatrix diagonal must be 0")
        if np.any(data < 0.0) or np.any(data > np.pi):
            raise ValueError("angles must lie in [0, pi]")
        object.__setattr__(self, "data", _frozen(data))


FeaturesLike = Union[FeatureMatrix, np.ndarray]


def as_points(features: FeaturesLike) -> np.ndarray:
    """Return the raw N x D array behind `features`, rejecting fewer than two rows"""
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected an N x D matrix, got shape {data.shape}")
    if data.shape[0] < 2:
        raise TooFewPoints(data.shape[0])
    return data


def row_norms(data: np.ndarray) -> np.ndarray:
    """L2 norms of the rows, raising ZeroNormRow for the first degenerate row"""
    norms = np.linalg.norm(data, axis=1)
    degenerate = np.flatnonzero(norms <= ROW_NORM_FLOOR)
    if degenerate.size:
        raise ZeroNormRow(int(degenerate[0]))
    return norms


def normalize(features: FeaturesLike) -> NormalizedFeatureMatrix:
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    norms = row_norms(data)
    return NormalizedFeatureMatrix(data / norms[:, None])


def unit_rows(data: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(unit rows, original norms) for an already-validated raw matrix"""
    norms = row_norms(data)
    return data / norms[:, None], norms


def clamped_cosines(units: np.ndarray) -> np.ndarray:
    """Gram matrix of unit rows, symmetrized, off-diagonal clamped, diagonal exactly 1"""
    cos = units @ units.T
    cos = 0.5 * (cos + cos.T)
    np.clip(cos, -1.0 + CLAMP_EPS, 1.0 - CLAMP_EPS, out=cos)
    np.fill_diagonal(cos, 1.0)
    return cos


def live_mask(cos: np.ndarray) -> np.ndarray:
    """Off-diagonal entries strictly inside the clamp band (where d/dcos is nonzero)"""
    mask = np.abs(cos) < 1.0 - CLAMP_EPS
    np.fill_diagonal(mask, False)
    return mask


def cosine_matrix(nf: NormalizedFeatureMatrix) -> CosineMatrix:
    return CosineMatrix(clamped_cosines(nf.data))


def angle_matrix(cos: CosineMatrix) -> AngleMatrix:
    theta = np.arccos(cos.data)
    np.fill_diagonal(theta, 0.0)
    return AngleMatrix(theta)


def pairwise_angles(features: FeaturesLike) -> np.ndarray:
    """Shortcut: raw features -> N x N angle array"""
    return angle_matrix(cosine_matrix(normalize(as_points(features)))).data


def min_pairwise_angle(features: FeaturesLike) -> float:
    """Smallest angle over all distinct pairs (the Tammes objective)"""
    theta = pairwise_angles(features)
    off = ~np.eye(theta.shape[0], dtype=bool)
    return float(theta[off].min())


def nearest_angles(features: FeaturesLike) -> np.ndarray:
    """Per-row minimum angle to any other row"""
    theta = pairwise_angles(features).copy()
    np.fill_diagonal(theta, np.inf)
    return theta.min(axis=1)


def off_diagonal_cosine_stats(features: FeaturesLike) -> Tuple[float, float]:
    """(mean, std) of the off-diagonal pairwise cosine similarities"""
    cos = cosine_matrix(normalize(as_points(features))).data
    upper = cos[np.triu_indices(cos.shape[0], k=1)]
    return float(upper.mean()), float(upper.std())
