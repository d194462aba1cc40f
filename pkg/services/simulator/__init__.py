from services.simulator.episode import SampleOutcome, SimResult, run_episode, tune_one_sample
from services.simulator.experiments import (
    ALL_REGULARIZERS,
    DEFAULT_LAMBDAS,
    DESK_REGIMES,
    evaluate_regime_claims,
    pareto_sweep,
    regime_claims_over_seeds,
    regime_experiment,
    regime_label,
)
from services.simulator.world import SimConfig, World, baseline_accuracy, generate_world, nearest_prototype
