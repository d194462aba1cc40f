"""
AdamW with decoupled weight decay and bias-corrected moments.

Sphere-constrained parameters (class feature rows) are renormalized after every update;
free parameters (prompt embeddings) are left as-is.
"""
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from services.errors import NonFiniteGradient, ShapeMismatch
from services.geometry.hypersphere import row_norms


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(default=5e-3, gt=0.0)
    steps: int = Field(default=1, gt=0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    beta1: float = Field(default=0.9, gt=0.0, lt=1.0)
    beta2: float = Field(default=0.999, gt=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    renormalize_each_step: bool = True
    seed: int = 0


@dataclass(frozen=True)
class OptimizerState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    sphere_constrained: bool = True

    @classmethod
    def initial(cls, params: np.ndarray, sphere_constrained: bool = True) -> "OptimizerState":
        params = np.array(params, dtype=np.float64, copy=True)
        return cls(
            params=params,
            m=np.zeros_like(params),
            v=np.zeros_like(params),
            step_count=0,
            sphere_constrained=sphere_constrained,
        )


def adamw_step(state: OptimizerState, grad: np.ndarray, cfg: OptimizerConfig) -> OptimizerState:
    """
    One AdamW update; returns a new state and leaves `state` untouched

        p <- p - lr * wd * p
        m <- b1 m + (1 - b1) g ;  v <- b2 v + (1 - b2) g^2
        p <- p - lr * m_hat / (sqrt(v_hat) + eps)
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.params.shape:
        raise ShapeMismatch(f"gradient shape {grad.shape} != parameter shape {state.params.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("refusing to apply a non-finite gradient")

    t = state.step_count + 1
    params = state.params * (1.0 - cfg.learning_rate * cfg.weight_decay)

    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)

    if state.sphere_constrained and cfg.renormalize_each_step:
        params = params / row_norms(params)[:, None]

    return OptimizerState(
        params=params,
        m=m,
        v=v,
        step_count=t,
        sphere_constrained=state.sphere_constrained,
    )
