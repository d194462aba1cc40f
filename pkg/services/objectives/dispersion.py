"""
Dispersion regularizers on the unit hypersphere, each returning a loss and its gradient
with respect to the RAW (pre-normalization) feature matrix.

- angular diversity: -(1/N) * sum_i min_{j != i} theta_ij   (hard min, tie-averaged subgradient,
  optional log-sum-exp smooth min)
- orthogonality: mean squared off-diagonal cosine
- ATFD: negated mean distance of normalized rows to their centroid
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional

import numpy as np

from services.errors import NonFiniteGradient
from services.geometry.hypersphere import (
    FeaturesLike,
    as_points,
    clamped_cosines,
    live_mask,
    unit_rows,
)

TIE_TOL = 1e-10
_CENTROID_FLOOR = 1e-15


@dataclass(frozen=True)
class ObjectiveEval:
    """Scalar loss plus its gradient (same shape as the differentiated input)"""

    value: float
    grad: np.ndarray

    def __post_init__(self):
        grad = np.array(self.grad, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient("objective produced a non-finite gradient")
        grad.setflags(write=False)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "value", float(self.value))


class Regularizer(str, Enum):
    NONE = "none"
    ATFD = "atfd"
    ORTHOGONALITY = "orthogonality"
    ANGULAR_DIVERSITY = "angular_diversity"


def _to_raw(grad_units: np.ndarray, units: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Chain dL/du_i through u_i = e_i / |e_i|: (I - u_i u_i^T) g_i / |e_i|"""
    radial = np.sum(grad_units * units, axis=1, keepdims=True)
    return (grad_units - radial * units) / norms[:, None]


def _through_gram(grad_cos: np.ndarray, units: np.ndarray) -> np.ndarray:
    """dL/dU for L depending on C = U U^T"""
    return (grad_cos + grad_cos.T) @ units


# ---------------------------------------------------------------- angular diversity

def _partner_weights(theta: np.ndarray, smooth_beta: Optional[float]):
    """Per-row min (or soft-min) angle and the weight each partner receives in it"""
    masked = theta.copy()
    np.fill_diagonal(masked, np.inf)

    if smooth_beta is None:
        row_min = masked.min(axis=1)
        ties = (masked - row_min[:, None]) <= TIE_TOL
        weights = ties / ties.sum(axis=1, keepdims=True)
        return row_min, weights

    z = -smooth_beta * masked
    z_max = z.max(axis=1, keepdims=True)
    ez = np.exp(z - z_max)
    total = ez.sum(axis=1, keepdims=True)
    soft_min = -(z_max + np.log(total))[:, 0] / smooth_beta
    return soft_min, ez / total


def _angular_parts(data: np.ndarray, smooth_beta: Optional[float]):
    units, norms = unit_rows(data)
    cos = clamped_cosines(units)
    theta = np.arccos(cos)
    np.fill_diagonal(theta, 0.0)
    row_min, weights = _partner_weights(theta, smooth_beta)
    return units, norms, cos, row_min, weights


def angular_diversity_value(features: FeaturesLike, smooth_beta: Optional[float] = None) -> float:
    data = as_points(features)
    _, _, _, row_min, _ = _angular_parts(data, smooth_beta)
    return -float(row_min.mean())


def angular_diversity(features: FeaturesLike, smooth_beta: Optional[float] = None) -> ObjectiveEval:
    """value = -AD; gradient flows only through each row's argmin partner(s)"""
    data = as_points(features)
    n = data.shape[0]
    units, norms, cos, row_min, weights = _angular_parts(data, smooth_beta)

    live = live_mask(cos)
    sin_theta = np.sqrt(np.where(live, (1.0 - cos) * (1.0 + cos), 1.0))
    # dL/dcos = dL/dtheta * dtheta/dcos = (-w/N) * (-1/sin)
    grad_cos = np.where(live, weights / (n * sin_theta), 0.0)

    grad_units = _through_gram(grad_cos, units)
    return ObjectiveEval(value=-float(row_min.mean()), grad=_to_raw(grad_units, units, norms))


# ---------------------------------------------------------------- orthogonality

def orthogonality_value(features: FeaturesLike) -> float:
    data = as_points(features)
    n = data.shape[0]
    units, _ = unit_rows(data)
    cos = clamped_cosines(units)
    np.fill_diagonal(cos, 0.0)
    return float(np.sum(cos * cos) / (n * (n - 1)))


def orthogonality_loss(features: FeaturesLike) -> ObjectiveEval:
    data = as_points(features)
    n = data.shape[0]
    units, norms = unit_rows(data)
    cos = clamped_cosines(units)
    live = live_mask(cos)
    np.fill_diagonal(cos, 0.0)

    value = np.sum(cos * cos) / (n * (n - 1))
    grad_cos = np.where(live, 2.0 * cos / (n * (n - 1)), 0.0)

    grad_units = _through_gram(grad_cos, units)
    return ObjectiveEval(value=value, grad=_to_raw(grad_units, units, norms))


# ---------------------------------------------------------------- ATFD

def atfd_value(features: FeaturesLike) -> float:
    data = as_points(features)
    units, _ = unit_rows(data)
    spread = units - units.mean(axis=0)
    return -float(np.linalg.norm(spread, axis=1).mean())


def atfd_loss(features: FeaturesLike) -> ObjectiveEval:
    data = as_points(features)
    n = data.shape[0]
    units, norms = unit_rows(data)

    spread = units - units.mean(axis=0)
    dist = np.linalg.norm(spread, axis=1)
    # rows sitting on the centroid contribute a zero subgradient
    safe = np.where(dist > _CENTROID_FLOOR, dist, 1.0)
    direction = np.where((dist > _CENTROID_FLOOR)[:, None], spread / safe[:, None], 0.0)

    grad_units = -(direction - direction.mean(axis=0)) / n
    return ObjectiveEval(value=-float(dist.mean()), grad=_to_raw(grad_units, units, norms))


OBJECTIVES: Dict[str, Callable[[FeaturesLike], ObjectiveEval]] = {
    Regularizer.ANGULAR_DIVERSITY.value: angular_diversity,
    Regularizer.ORTHOGONALITY.value: orthogonality_loss,
    Regularizer.ATFD.value: atfd_loss,
}

OBJECTIVE_VALUES: Dict[str, Callable[[FeaturesLike], float]] = {
    Regularizer.ANGULAR_DIVERSITY.value: angular_diversity_value,
    Regularizer.ORTHOGONALITY.value: orthogonality_value,
    Regularizer.ATFD.value: atfd_value,
}


def regularizer_loss(
    regularizer: Regularizer,
    features: FeaturesLike,
    smooth_beta: Optional[float] = None,
) -> ObjectiveEval:
    """Dispatch on the regularizer selector; NONE yields a zero loss and gradient"""
    regularizer = Regularizer(regularizer)
    if regularizer is Regularizer.NONE:
        data = as_points(features)
        return ObjectiveEval(value=0.0, grad=np.zeros_like(data))
    if regularizer is Regularizer.ANGULAR_DIVERSITY:
        return angular_diversity(features, smooth_beta=smooth_beta)
    return OBJECTIVES[regularizer.value](features)
