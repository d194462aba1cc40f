"""
Test-time classification loss, zero-shot probability heads and the combined tuning objective

    L = L_TPT + lambda * L_reg
"""
import math
from dataclasses import dataclass
from typing import Literal, Optional, Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from services.errors import DegenerateProbability, ShapeMismatch
from services.geometry.hypersphere import FeaturesLike, as_points, row_norms, unit_rows
from services.objectives.dispersion import ObjectiveEval, Regularizer, _to_raw, regularizer_loss

PROB_FLOOR = 1e-30
PROB_SUM_TOL = 1e-9

TPTMode = Literal["max_log_prob", "entropy"]


def _as_batch(probabilities) -> np.ndarray:
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.ndim == 1:
        probs = probs[None, :]
    if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
        raise DegenerateProbability(f"expected a B x K probability batch, got shape {probs.shape}")
    return probs


def validate_probabilities(probs: np.ndarray) -> None:
    if not np.all(np.isfinite(probs)) or np.any(probs <= PROB_FLOOR):
        raise DegenerateProbability(f"probability entries must exceed {PROB_FLOOR}")
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > PROB_SUM_TOL):
        worst = int(np.argmax(np.abs(sums - 1.0)))
        raise DegenerateProbability(f"probability vector {worst} sums to {sums[worst]!r}, not 1")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def _confidence_loss(probs: np.ndarray, logp: np.ndarray, mode: TPTMode) -> ObjectiveEval:
    batch = probs.shape[0]
    if mode == "max_log_prob":
        top = np.argmax(probs, axis=1)
        per_sample = -logp[np.arange(batch), top]
        grad = probs.copy()
        grad[np.arange(batch), top] -= 1.0
    elif mode == "entropy":
        per_sample = -np.sum(probs * logp, axis=1)
        grad = -probs * (logp + per_sample[:, None])
    else:
        raise ValueError(f"unknown TPT mode {mode!r}")

    # fixed summation order keeps the batch mean bit-reproducible
    value = math.fsum(per_sample.tolist()) / batch
    return ObjectiveEval(value=value, grad=grad / batch)


def tpt_loss(probabilities, mode: TPTMode = "max_log_prob") -> ObjectiveEval:
    """
    Batch-mean confidence loss with its gradient w.r.t. the logits behind `probabilities`

    Args:
        probabilities: B x K (or a single K-vector) of softmax outputs
        mode: "max_log_prob" -> -log max_k p_k ; "entropy" -> -sum_k p_k log p_k

    Returns:
        ObjectiveEval whose grad is B x K (d value / d logits)
    """
    probs = _as_batch(probabilities)
    validate_probabilities(probs)
    return _confidence_loss(probs, np.log(probs), mode)


def tpt_loss_from_logits(logits: np.ndarray, mode: TPTMode = "max_log_prob") -> ObjectiveEval:
    """Same loss evaluated through log-softmax, safe when far classes underflow to p = 0"""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    logp = log_softmax(logits)
    return _confidence_loss(np.exp(logp), logp, mode)


class ProbabilityProvider(Protocol):
    def logits(self, features: np.ndarray) -> np.ndarray: ...

    def probabilities(self, features: np.ndarray) -> np.ndarray: ...

    def backward(self, features: np.ndarray, grad_logits: np.ndarray) -> np.ndarray: ...


class CosineSoftmaxHead:
    """Zero-shot head: p = softmax(cos(v_b, t_k) / tau) for a batch of image features v_b"""

    def __init__(self, image_features: np.ndarray, temperature: float = 0.01):
        images = np.atleast_2d(np.asarray(image_features, dtype=np.float64))
        self.image_features = images / row_norms(images)[:, None]
        self.temperature = float(temperature)

    def logits(self, features: np.ndarray) -> np.ndarray:
        units, _ = unit_rows(np.asarray(features, dtype=np.float64))
        if units.shape[1] != self.image_features.shape[1]:
            raise ShapeMismatch(
                f"feature dim {units.shape[1]} != image dim {self.image_features.shape[1]}"
            )
        return (self.image_features @ units.T) / self.temperature

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        return softmax(self.logits(features))

    def backward(self, features: np.ndarray, grad_logits: np.ndarray) -> np.ndarray:
        units, norms = unit_rows(np.asarray(features, dtype=np.float64))
        grad_units = (grad_logits.T @ self.image_features) / self.temperature
        return _to_raw(grad_units, units, norms)


class FixedProbabilities:
    """Probabilities held constant w.r.t. the features (no gradient reaches them)"""

    def __init__(self, probabilities):
        probs = _as_batch(probabilities)
        validate_probabilities(probs)
        self._probs = probs

    def logits(self, features: np.ndarray) -> np.ndarray:
        return np.log(self._probs)

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        return self._probs

    def backward(self, features: np.ndarray, grad_logits: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(features, dtype=np.float64))


class CombinedLossConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    lambda_: float = Field(default=80.0, ge=0.0, alias="lambda")
    temperature: float = Field(default=0.01, gt=0.0)
    regularizer: Regularizer = Regularizer.ANGULAR_DIVERSITY
    tpt_mode: TPTMode = "max_log_prob"
    smooth_beta: Optional[float] = Field(default=None, gt=0.0)


@dataclass(frozen=True)
class CombinedEval(ObjectiveEval):
    tpt_term: float
    reg_term: float


def combined_loss(
    features: FeaturesLike,
    probabilities,
    cfg: CombinedLossConfig,
    head: Optional[ProbabilityProvider] = None,
) -> CombinedEval:
    """
    value = tpt_loss + lambda * regularizer; grad w.r.t. the raw feature matrix

    Args:
        features: N x D raw class features
        probabilities: fixed B x N probabilities (constant w.r.t. the features), or None
        cfg: lambda / regularizer / TPT mode
        head: when given, logits come from the head and the TPT gradient is chained
            through it back to the features; `probabilities` is then ignored

    With neither `probabilities` nor `head` the classification term is ablated.
    """
    data = as_points(features)

    if head is not None:
        tpt = tpt_loss_from_logits(head.logits(data), cfg.tpt_mode)
        tpt_value, grad = tpt.value, head.backward(data, tpt.grad)
    elif probabilities is not None:
        tpt_value, grad = tpt_loss(probabilities, cfg.tpt_mode).value, np.zeros_like(data)
    else:
        tpt_value, grad = 0.0, np.zeros_like(data)

    if cfg.lambda_ == 0.0 or cfg.regularizer is Regularizer.NONE:
        return CombinedEval(value=tpt_value, grad=grad, tpt_term=tpt_value, reg_term=0.0)

    reg = regularizer_loss(cfg.regularizer, data, smooth_beta=cfg.smooth_beta)
    reg_term = cfg.lambda_ * reg.value
    return CombinedEval(
        value=tpt_value + reg_term,
        grad=grad + cfg.lambda_ * reg.grad,
        tpt_term=tpt_value,
        reg_term=reg_term,
    )
