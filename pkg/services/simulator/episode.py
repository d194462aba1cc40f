"""
Episodic test-time tuning: every test sample restarts from the initial class features (or
prompts), tunes against its own zero-shot probabilities and is classified with the result
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel

from services.calibration.metrics import CalibrationReport, DEFAULT_BINS, PredictionRecord, compute_ece
from services.errors import EmptyLog
from services.geometry.hypersphere import nearest_angles, off_diagonal_cosine_stats
from services.objectives.tpt import CosineSoftmaxHead
from services.optimizer.adamw import OptimizerConfig
from services.optimizer.tuning import tune_features, tune_prompts
from services.simulator.world import SimConfig, World

logger = structlog.get_logger(__name__)


class SampleOutcome(NamedTuple):
    record: PredictionRecord
    mean_min_angle: float
    cosine_mean: float
    cosine_std: float


class SimResult(BaseModel):
    calibration: CalibrationReport
    mean_min_angle: float
    mean_cosine_stats: List[Tuple[float, float]]
    records: List[PredictionRecord]

    @property
    def accuracy(self) -> float:
        return self.calibration.accuracy

    @property
    def cosine_mean(self) -> float:
        return float(np.mean([m for m, _ in self.mean_cosine_stats]))

    @property
    def cosine_std(self) -> float:
        return float(np.mean([s for _, s in self.mean_cosine_stats]))


def tune_one_sample(world: World, index: int, cfg: SimConfig, opt_cfg: OptimizerConfig) -> SampleOutcome:
    head = CosineSoftmaxHead(world.samples[index], temperature=cfg.temperature)
    loss_cfg = cfg.loss_config()

    if cfg.parameterization == "prompts":
        _, tuned, _ = tune_prompts(world.encoder, world.initial_prompts, head, opt_cfg, loss_cfg)
    else:
        tuned, _ = tune_features(world.initial_features, head, opt_cfg, loss_cfg)

    probs = head.probabilities(tuned.data)[0]
    record = PredictionRecord.from_probabilities(probs, int(world.labels[index]))
    cos_mean, cos_std = off_diagonal_cosine_stats(tuned)
    return SampleOutcome(record, float(nearest_angles(tuned).mean()), cos_mean, cos_std)


def run_episode(
    world: World,
    cfg: SimConfig,
    opt_cfg: Optional[OptimizerConfig] = None,
    n_bins: int = DEFAULT_BINS,
    workers: int = 1,
) -> SimResult:
    """
    Tune and classify every sample of the world

    Samples are independent, so `workers` > 1 spreads them over a thread pool; results are
    collected in sample order and match the serial run exactly.
    """
    if world.n_samples == 0:
        raise EmptyLog("episode over a world with no test samples")
    opt_cfg = opt_cfg or OptimizerConfig()

    def work(i: int) -> SampleOutcome:
        return tune_one_sample(world, i, cfg, opt_cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, range(world.n_samples)))
    else:
        outcomes = [work(i) for i in range(world.n_samples)]

    records = [o.record for o in outcomes]
    report = compute_ece(records, n_bins=n_bins)
    result = SimResult(
        calibration=report,
        mean_min_angle=float(np.mean([o.mean_min_angle for o in outcomes])),
        mean_cosine_stats=[(o.cosine_mean, o.cosine_std) for o in outcomes],
        records=records,
    )
    logger.info(
        "episode done",
        n_classes=world.prototypes.shape[0],
        dim=world.prototypes.shape[1],
        regularizer=cfg.regularizer.value,
        lam=cfg.lambda_,
        accuracy=report.accuracy,
        ece=report.ece,
        mean_min_angle=result.mean_min_angle,
    )
    return result
