"""
Multi-start best-packing (Tammes) solver: maximize angular diversity alone from seeded random
starts and keep the configuration with the largest minimum pairwise angle.
"""
from typing import List, NamedTuple, Optional

import numpy as np
import structlog

from services.errors import ConfigError
from services.geometry.hypersphere import FeatureMatrix, min_pairwise_angle, normalize
from services.objectives.dispersion import Regularizer
from services.objectives.tpt import CombinedLossConfig, combined_loss
from services.optimizer.adamw import OptimizerConfig, OptimizerState, adamw_step

logger = structlog.get_logger(__name__)

DEFAULT_RESTARTS = 10
TAMMES_OPTIMIZER = OptimizerConfig(learning_rate=1e-2, steps=2000)
TAMMES_LOSS = CombinedLossConfig(lambda_=1.0, regularizer=Regularizer.ANGULAR_DIVERSITY)


class RestartResult(NamedTuple):
    seed: int
    features: FeatureMatrix
    min_angle: float


class TammesSolution(NamedTuple):
    features: FeatureMatrix
    min_angle: float
    restarts: List[RestartResult]

    @property
    def restart_angles(self) -> List[float]:
        return [r.min_angle for r in self.restarts]


def _single_run(n: int, d: int, seed: int, cfg: OptimizerConfig) -> RestartResult:
    start = np.random.default_rng(seed).standard_normal((n, d))
    state = OptimizerState.initial(normalize(start).data, sphere_constrained=True)

    best_params, best_angle = state.params, min_pairwise_angle(state.params)
    for _ in range(cfg.steps):
        ev = combined_loss(state.params, None, TAMMES_LOSS)
        state = adamw_step(state, ev.grad, cfg)
        angle = min_pairwise_angle(state.params)
        if angle > best_angle:
            best_params, best_angle = state.params, angle
    return RestartResult(seed, FeatureMatrix(best_params), best_angle)


def solve_tammes(
    n: int,
    d: int,
    cfg: Optional[OptimizerConfig] = None,
    restarts: int = DEFAULT_RESTARTS,
) -> TammesSolution:
    """
    Best of `restarts` AD-only runs; restart r starts from seed cfg.seed + r

    Args:
        n: number of points (>= 2)
        d: ambient dimension (>= 2)
        cfg: optimizer settings; defaults to lr 1e-2 for 2000 steps
        restarts: number of seeded random starts
    """
    if n < 2:
        raise ConfigError(f"Tammes needs n >= 2 points, got {n}")
    if d < 2:
        raise ConfigError(f"Tammes needs dimension d >= 2, got {d}")
    if restarts < 1:
        raise ConfigError(f"restarts must be >= 1, got {restarts}")
    cfg = cfg or TAMMES_OPTIMIZER

    runs = []
    for r in range(restarts):
        result = _single_run(n, d, cfg.seed + r, cfg)
        logger.debug("tammes restart", n=n, d=d, seed=result.seed, min_angle_deg=float(np.degrees(result.min_angle)))
        runs.append(result)

    # first maximum wins, so adding restarts never lowers the result
    best = max(runs, key=lambda r: r.min_angle)
    logger.info("tammes solved", n=n, d=d, restarts=restarts, min_angle_deg=float(np.degrees(best.min_angle)))
    return TammesSolution(best.features, best.min_angle, runs)
