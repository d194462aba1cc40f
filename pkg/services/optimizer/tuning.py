"""
Test-time tuning loops: raw class features directly, or prompt vectors through a frozen encoder.

Every step evaluates combined_loss at the current parameters, records the loss, then applies one
AdamW update. With the default OptimizerConfig (steps=1, lr=5e-3) this is the single-step
test-time protocol.
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from services.errors import ShapeMismatch
from services.geometry.hypersphere import FeatureMatrix, FeaturesLike, as_points
from services.objectives.tpt import CombinedEval, CombinedLossConfig, ProbabilityProvider, combined_loss
from services.optimizer.adamw import OptimizerConfig, OptimizerState, adamw_step

TRACE_COLUMNS = ["step", "total_loss", "tpt_term", "reg_term"]


class TraceRow(NamedTuple):
    step: int
    total_loss: float
    tpt_term: float
    reg_term: float


@dataclass(frozen=True)
class ToyEncoder:
    """Frozen linear text encoder: features = prompts @ weight (P x D)"""

    weight: np.ndarray

    def __post_init__(self):
        weight = np.array(self.weight, dtype=np.float64, copy=True)
        if weight.ndim != 2:
            raise ShapeMismatch(f"encoder weight must be P x D, got shape {weight.shape}")
        if not np.all(np.isfinite(weight)):
            raise ValueError("encoder weight entries must be finite")
        weight.setflags(write=False)
        object.__setattr__(self, "weight", weight)

    @classmethod
    def sample(cls, prompt_dim: int, dim: int, seed: int = 0) -> "ToyEncoder":
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((prompt_dim, dim)) / math.sqrt(prompt_dim))

    @classmethod
    def identity(cls, dim: int) -> "ToyEncoder":
        return cls(np.eye(dim))

    @property
    def prompt_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    def encode(self, prompts: np.ndarray) -> np.ndarray:
        prompts = np.asarray(prompts, dtype=np.float64)
        if prompts.ndim != 2 or prompts.shape[1] != self.prompt_dim:
            raise ShapeMismatch(
                f"prompts of shape {prompts.shape} do not match encoder input width {self.prompt_dim}"
            )
        return prompts @ self.weight


def random_prompts(n_classes: int, prompt_dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_classes, prompt_dim)) / math.sqrt(prompt_dim)


def _trace_row(step: int, ev: CombinedEval) -> TraceRow:
    return TraceRow(step, ev.value, ev.tpt_term, ev.reg_term)


def tune_features(
    initial: FeaturesLike,
    provider: Optional[ProbabilityProvider],
    cfg: OptimizerConfig,
    loss_cfg: CombinedLossConfig,
) -> Tuple[FeatureMatrix, List[TraceRow]]:
    """
    Optimize the raw class features under L_TPT + lambda * L_reg

    Args:
        initial: N x D starting features
        provider: probability head the TPT term is computed from; None ablates the TPT term
        cfg: optimizer settings (steps, lr, ...)
        loss_cfg: lambda, regularizer and TPT mode

    Returns:
        (final features, one trace row per step)
    """
    state = OptimizerState.initial(as_points(initial), sphere_constrained=True)
    trace = []
    for step in range(cfg.steps):
        ev = combined_loss(state.params, None, loss_cfg, head=provider)
        trace.append(_trace_row(step, ev))
        state = adamw_step(state, ev.grad, cfg)
    return FeatureMatrix(state.params), trace


def prompt_gradient(
    encoder: ToyEncoder,
    prompts: np.ndarray,
    provider: Optional[ProbabilityProvider],
    loss_cfg: CombinedLossConfig,
) -> CombinedEval:
    """combined_loss at features = prompts @ W, with the gradient pulled back to the prompts"""
    ev = combined_loss(encoder.encode(prompts), None, loss_cfg, head=provider)
    return CombinedEval(
        value=ev.value,
        grad=ev.grad @ encoder.weight.T,
        tpt_term=ev.tpt_term,
        reg_term=ev.reg_term,
    )


def tune_prompts(
    encoder: ToyEncoder,
    initial_prompts: np.ndarray,
    provider: Optional[ProbabilityProvider],
    cfg: OptimizerConfig,
    loss_cfg: CombinedLossConfig,
) -> Tuple[np.ndarray, FeatureMatrix, List[TraceRow]]:
    """Same loop as tune_features, with prompt vectors as the free (unconstrained) parameters"""
    state = OptimizerState.initial(initial_prompts, sphere_constrained=False)
    encoder.encode(state.params)

    trace = []
    for step in range(cfg.steps):
        ev = prompt_gradient(encoder, state.params, provider, loss_cfg)
        trace.append(_trace_row(step, ev))
        state = adamw_step(state, ev.grad, cfg)

    prompts = state.params.copy()
    prompts.setflags(write=False)
    return prompts, FeatureMatrix(encoder.encode(prompts)), trace


def trace_frame(trace: List[TraceRow]) -> pd.DataFrame:
    return pd.DataFrame([row._asdict() for row in trace], columns=TRACE_COLUMNS)


def write_trace(trace: List[TraceRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_frame(trace).to_csv(path, index=False, float_format="%.9f")
    return path
