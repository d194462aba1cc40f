"""
Central finite-difference oracle for the analytic objective gradients
"""
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from services.errors import ConfigError, ShapeMismatch
from services.geometry.hypersphere import FeatureMatrix, pairwise_angles
from services.objectives.dispersion import OBJECTIVE_VALUES, OBJECTIVES, Regularizer

logger = structlog.get_logger(__name__)

MIN_STEP, MAX_STEP = 1e-8, 1e-2
CLAMP_BAND_COS = 1.0 - 1e-6
TIE_MARGIN_STEPS = 100.0
MIN_ROW_NORM = 1e-2

ObjectiveSelector = Union[str, Regularizer, Callable[[np.ndarray], float]]


class GradCheckReport(BaseModel):
    max_rel_error: float = Field(ge=0.0)
    max_abs_error: float = Field(ge=0.0)
    worst_entry: Tuple[int, ...]
    passed: bool
    threshold: float
    abs_floor: float


def _value_fn(objective: ObjectiveSelector) -> Callable[[np.ndarray], float]:
    if callable(objective):
        return objective
    name = Regularizer(objective).value
    if name not in OBJECTIVE_VALUES:
        raise ConfigError(f"no finite-difference target for objective {name!r}")
    return OBJECTIVE_VALUES[name]


def finite_diff_gradient(
    objective: ObjectiveSelector,
    features: Union[FeatureMatrix, np.ndarray, float],
    step: float = 1e-5,
) -> np.ndarray:
    """(f(x + h e_k) - f(x - h e_k)) / 2h for every entry k of `features`"""
    if not MIN_STEP <= step <= MAX_STEP:
        raise ConfigError(f"finite-difference step {step} outside [{MIN_STEP}, {MAX_STEP}]")
    fn = _value_fn(objective)

    source = features.data if isinstance(features, FeatureMatrix) else features
    x = np.array(source, dtype=np.float64, copy=True)
    grad = np.empty_like(x)

    for idx in np.ndindex(x.shape):
        original = x[idx]
        x[idx] = original + step
        f_plus = float(fn(x))
        x[idx] = original - step
        f_minus = float(fn(x))
        x[idx] = original
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad


def compare_gradients(
    analytic: np.ndarray,
    numeric: np.ndarray,
    threshold: float = 1e-4,
    abs_floor: float = 1e-7,
) -> GradCheckReport:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise ShapeMismatch(f"analytic {analytic.shape} vs numeric {numeric.shape}")
    # the absolute floor never exceeds the relative gate
    floor = min(abs_floor, threshold)

    abs_err = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel_err = abs_err / np.where(scale > 0.0, scale, 1.0)
    # an entry agrees when it is inside the relative gate or the absolute floor
    agrees = (rel_err <= threshold) | (abs_err <= floor)
    # entries no larger than the floor carry no meaningful relative error
    reported = np.where(scale > floor, rel_err, 0.0)

    ranking = np.where(agrees, reported, np.inf)
    worst = np.unravel_index(int(np.argmax(ranking)), ranking.shape) if ranking.size else ()
    return GradCheckReport(
        max_rel_error=float(reported.max(initial=0.0)),
        max_abs_error=float(abs_err.max(initial=0.0)),
        worst_entry=tuple(int(i) for i in worst),
        passed=bool(agrees.all()),
        threshold=threshold,
        abs_floor=floor,
    )


def check_gradient(
    objective: Union[str, Regularizer],
    features: Union[FeatureMatrix, np.ndarray],
    threshold: float = 1e-4,
    abs_floor: float = 1e-7,
    step: float = 1e-5,
) -> GradCheckReport:
    name = Regularizer(objective).value
    analytic = OBJECTIVES[name](features).grad
    numeric = finite_diff_gradient(name, features, step=step)
    return compare_gradients(analytic, numeric, threshold=threshold, abs_floor=abs_floor)


def nondifferentiable_reason(
    objective: Union[str, Regularizer],
    features: np.ndarray,
    step: float = 1e-5,
) -> Optional[str]:
    """Why central differences are not a valid oracle at `features`, or None"""
    data = np.asarray(features, dtype=np.float64)
    if np.linalg.norm(data, axis=1).min() < MIN_ROW_NORM:
        return "row norm below conditioning floor"

    theta = pairwise_angles(data)
    off = ~np.eye(theta.shape[0], dtype=bool)
    if np.any(np.abs(np.cos(theta[off])) > CLAMP_BAND_COS):
        return "pair inside clamp band"

    if Regularizer(objective) is Regularizer.ANGULAR_DIVERSITY and theta.shape[0] > 2:
        ranked = np.sort(np.where(off, theta, np.inf), axis=1)
        if np.any(ranked[:, 1] - ranked[:, 0] < TIE_MARGIN_STEPS * step):
            return "argmin near-tie"
    return None


class ObjectiveSweep(BaseModel):
    objective: str
    checked: int = 0
    skipped: int = 0
    skip_reasons: Dict[str, int] = Field(default_factory=dict)
    max_rel_error: float = 0.0
    failures: List[Dict] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def sweep_gradients(
    seeds: Iterable[int],
    n_values: Sequence[int] = (3, 8, 20),
    d_values: Sequence[int] = (2, 16, 64),
    objectives: Sequence[str] = tuple(OBJECTIVES),
    threshold: float = 1e-4,
    abs_floor: float = 1e-7,
    step: float = 1e-5,
) -> List[ObjectiveSweep]:
    """Analytic vs finite-difference agreement over a seed x N x D grid, per objective"""
    seeds = list(seeds)
    results = []
    for objective in objectives:
        sweep = ObjectiveSweep(objective=Regularizer(objective).value)
        for seed in seeds:
            for n in n_values:
                for d in d_values:
                    features = np.random.default_rng(seed).standard_normal((n, d))
                    reason = nondifferentiable_reason(objective, features, step=step)
                    if reason is not None:
                        sweep.skipped += 1
                        sweep.skip_reasons[reason] = sweep.skip_reasons.get(reason, 0) + 1
                        logger.debug("gradcheck skip", objective=sweep.objective, seed=seed, n=n, d=d, reason=reason)
                        continue

                    report = check_gradient(objective, features, threshold, abs_floor, step)
                    sweep.checked += 1
                    sweep.max_rel_error = max(sweep.max_rel_error, report.max_rel_error)
                    if not report.passed:
                        sweep.failures.append({"seed": seed, "n": n, "d": d, **report.model_dump()})
                        logger.warning("gradcheck gate failed", objective=sweep.objective, seed=seed, n=n, d=d,
                                       max_rel_error=report.max_rel_error)

        logger.info("gradcheck sweep done", objective=sweep.objective, checked=sweep.checked,
                    skipped=sweep.skipped, max_rel_error=sweep.max_rel_error)
        results.append(sweep)
    return results
