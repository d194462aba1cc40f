from services.objectives.dispersion import (
    OBJECTIVES,
    OBJECTIVE_VALUES,
    ObjectiveEval,
    Regularizer,
    angular_diversity,
    atfd_loss,
    orthogonality_loss,
    regularizer_loss,
)
from services.objectives.tpt import (
    CombinedEval,
    CombinedLossConfig,
    CosineSoftmaxHead,
    FixedProbabilities,
    combined_loss,
    tpt_loss,
    tpt_loss_from_logits,
)

__all__ = [
    "OBJECTIVES",
    "OBJECTIVE_VALUES",
    "ObjectiveEval",
    "Regularizer",
    "angular_diversity",
    "atfd_loss",
    "orthogonality_loss",
    "regularizer_loss",
    "CombinedEval",
    "CombinedLossConfig",
    "CosineSoftmaxHead",
    "FixedProbabilities",
    "combined_loss",
    "tpt_loss",
    "tpt_loss_from_logits",
]
