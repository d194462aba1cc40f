"""
Matched-seed experiments on top of run_episode:
- regime comparison of the four regularizers with classes above / below the embedding dimension
- lambda sweep for accuracy vs calibration trade-offs
- per-seed evaluation of the regime orderings
"""
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
import structlog

from services.calibration.metrics import DEFAULT_BINS
from services.errors import ConfigError
from services.objectives.dispersion import Regularizer
from services.optimizer.adamw import OptimizerConfig
from services.simulator.episode import run_episode
from services.simulator.world import SimConfig, World, generate_world

logger = structlog.get_logger(__name__)

DESK_REGIMES: List[Tuple[int, int]] = [(200, 64), (10, 64)]
DEFAULT_LAMBDAS: List[float] = [0.0, 1.0, 10.0, 80.0, 200.0]
REGIME_COLUMNS = [
    "regime", "n", "d", "regularizer", "accuracy", "ece", "mean_min_angle", "cosine_mean", "cosine_std",
]
PARETO_COLUMNS = ["lambda", "accuracy", "ece", "mean_min_angle"]
ALL_REGULARIZERS = (
    Regularizer.NONE,
    Regularizer.ATFD,
    Regularizer.ORTHOGONALITY,
    Regularizer.ANGULAR_DIVERSITY,
)


def regime_label(n: int, d: int) -> str:
    if n > d:
        return "N>D"
    if n < d:
        return "N<D"
    return "N=D"


def _check_regimes(regimes: Sequence[Tuple[int, int]]) -> None:
    labels = {regime_label(n, d) for n, d in regimes}
    if not {"N>D", "N<D"} <= labels:
        raise ConfigError("regimes must include at least one N > D and one N < D case")


def regime_experiment(
    regimes: Sequence[Tuple[int, int]],
    template: SimConfig,
    opt_cfg: Optional[OptimizerConfig] = None,
    regularizers: Iterable[Regularizer] = ALL_REGULARIZERS,
    n_bins: int = DEFAULT_BINS,
    workers: int = 1,
) -> pd.DataFrame:
    """One row per (regime, regularizer); all regularizers of a regime share one world"""
    _check_regimes(regimes)
    regularizers = list(regularizers)

    rows = []
    for n, d in regimes:
        cfg = template.model_copy(update={"n_classes": n, "dim": d})
        world = generate_world(cfg)
        for reg in regularizers:
            result = run_episode(world, cfg.model_copy(update={"regularizer": reg}), opt_cfg, n_bins, workers)
            rows.append({
                "regime": regime_label(n, d),
                "n": n,
                "d": d,
                "regularizer": reg.value,
                "accuracy": result.accuracy,
                "ece": result.calibration.ece,
                "mean_min_angle": result.mean_min_angle,
                "cosine_mean": result.cosine_mean,
                "cosine_std": result.cosine_std,
            })
    return pd.DataFrame(rows, columns=REGIME_COLUMNS)


def evaluate_regime_claims(table: pd.DataFrame) -> Dict[str, bool]:
    """
    The three orderings expected of angular diversity in one regime table:
    cosine_std_above_dim: AD cosine std <= orthogonality's when N > D
    cosine_mean_below_dim: AD cosine mean <= orthogonality's when N < D
    min_angle_dominates: AD mean min angle >= every other regularizer's, in every regime
    """
    def metric(regime: str, reg: Regularizer, column: str) -> pd.Series:
        mask = (table["regime"] == regime) & (table["regularizer"] == reg.value)
        return table.loc[mask, column]

    ad, ortho = Regularizer.ANGULAR_DIVERSITY, Regularizer.ORTHOGONALITY
    claims = {
        "cosine_std_above_dim": bool(
            (metric("N>D", ad, "cosine_std").values <= metric("N>D", ortho, "cosine_std").values).all()
        ),
        "cosine_mean_below_dim": bool(
            (metric("N<D", ad, "cosine_mean").values <= metric("N<D", ortho, "cosine_mean").values).all()
        ),
    }

    dominates = True
    for (n, d), group in table.groupby(["n", "d"], sort=False):
        ad_angle = group.loc[group["regularizer"] == ad.value, "mean_min_angle"]
        others = group.loc[group["regularizer"] != ad.value, "mean_min_angle"]
        if ad_angle.empty or others.empty:
            continue
        dominates &= bool(ad_angle.iloc[0] >= others.max())
    claims["min_angle_dominates"] = dominates
    return claims


def regime_claims_over_seeds(
    seeds: Iterable[int],
    regimes: Sequence[Tuple[int, int]],
    template: SimConfig,
    opt_cfg: Optional[OptimizerConfig] = None,
    n_bins: int = DEFAULT_BINS,
    workers: int = 1,
) -> pd.DataFrame:
    """Claim outcomes per seed, one row per master seed"""
    rows = []
    for seed in seeds:
        table = regime_experiment(
            regimes, template.model_copy(update={"master_seed": seed}), opt_cfg, n_bins=n_bins, workers=workers
        )
        claims = evaluate_regime_claims(table)
        logger.info("regime claims", seed=seed, **claims)
        rows.append({"seed": seed, **claims})
    return pd.DataFrame(rows, columns=["seed", "cosine_std_above_dim", "cosine_mean_below_dim", "min_angle_dominates"])


def pareto_sweep(
    lambdas: Sequence[float],
    world: World,
    cfg: SimConfig,
    opt_cfg: Optional[OptimizerConfig] = None,
    n_bins: int = DEFAULT_BINS,
    workers: int = 1,
) -> pd.DataFrame:
    """One episode per lambda on the shared world, rows in the order given"""
    if any(lam < 0 for lam in lambdas):
        raise ConfigError("lambda values must be non-negative")

    rows = []
    for lam in lambdas:
        result = run_episode(world, cfg.model_copy(update={"lambda_": float(lam)}), opt_cfg, n_bins, workers)
        rows.append({
            "lambda": float(lam),
            "accuracy": result.accuracy,
            "ece": result.calibration.ece,
            "mean_min_angle": result.mean_min_angle,
        })
    return pd.DataFrame(rows, columns=PARETO_COLUMNS)
