"""
Synthetic zero-shot world: class prototypes on the sphere, noisy image features around them and
initial class (text) features that cluster the way hand-written prompt embeddings do
"""
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from services.geometry.hypersphere import normalize
from services.objectives.dispersion import Regularizer
from services.objectives.tpt import CombinedLossConfig, TPTMode
from services.optimizer.tuning import ToyEncoder, random_prompts

# independent streams spawned from the master seed
_PROTOTYPE_STREAM, _SAMPLE_STREAM, _TEXT_STREAM, _ENCODER_STREAM, _PROMPT_STREAM = range(5)


class SimConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, frozen=True, extra="forbid")

    n_classes: int = Field(default=10, ge=2)
    dim: int = Field(default=64, ge=2)
    prompt_dim: int = Field(default=64, ge=1)
    n_samples: int = Field(default=100, ge=0)
    noise_sigma: float = Field(default=0.3, gt=0.0)
    class_separation: Literal["uniform_sphere"] = "uniform_sphere"
    temperature: float = Field(default=0.01, gt=0.0)
    lambda_: float = Field(default=80.0, ge=0.0, alias="lambda")
    regularizer: Regularizer = Regularizer.ANGULAR_DIVERSITY
    master_seed: int = Field(default=0, ge=0)
    text_alignment: float = Field(default=1.0, ge=0.0)
    modality_gap: float = Field(default=0.5, ge=0.0)
    text_noise: float = Field(default=0.05, ge=0.0)
    parameterization: Literal["features", "prompts"] = "features"
    # "random": seeded N(0, 1/P) prompts; "text": least-squares prompts that encode the text features
    prompt_init: Literal["random", "text"] = "random"
    tpt_mode: TPTMode = "max_log_prob"

    def loss_config(self) -> CombinedLossConfig:
        return CombinedLossConfig(
            lambda_=self.lambda_,
            temperature=self.temperature,
            regularizer=self.regularizer,
            tpt_mode=self.tpt_mode,
        )


@dataclass(frozen=True)
class World:
    prototypes: np.ndarray
    samples: np.ndarray
    labels: np.ndarray
    initial_features: np.ndarray
    encoder: Optional[ToyEncoder] = None
    initial_prompts: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("prototypes", "samples", "labels", "initial_features", "initial_prompts"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.array(value, copy=True)
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


def _rng(cfg: SimConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.master_seed, stream])


def generate_world(cfg: SimConfig, prototypes: Optional[np.ndarray] = None) -> World:
    """
    Build the world fully determined by cfg.master_seed

    Args:
        cfg: simulator configuration
        prototypes: optional N x D class prototypes replacing the uniformly sampled ones

    Returns:
        World with unit prototypes, unit test samples normalize(prototype + sigma * noise),
        uniform labels and the initial class features
    """
    if prototypes is None:
        prototypes = _rng(cfg, _PROTOTYPE_STREAM).standard_normal((cfg.n_classes, cfg.dim))
    prototypes = normalize(np.asarray(prototypes, dtype=np.float64)).data

    sample_rng = _rng(cfg, _SAMPLE_STREAM)
    labels = sample_rng.integers(0, cfg.n_classes, size=cfg.n_samples)
    noise = sample_rng.standard_normal((cfg.n_samples, cfg.dim))
    samples = prototypes[labels] + cfg.noise_sigma * noise
    samples = normalize(samples).data

    text_rng = _rng(cfg, _TEXT_STREAM)
    shared = text_rng.standard_normal(cfg.dim)
    shared /= np.linalg.norm(shared)
    text = (
        cfg.text_alignment * prototypes
        + cfg.modality_gap * shared
        + cfg.text_noise * text_rng.standard_normal(prototypes.shape)
    )
    initial_features = normalize(text).data

    encoder = initial_prompts = None
    if cfg.parameterization == "prompts":
        encoder = ToyEncoder.sample(cfg.prompt_dim, cfg.dim, seed=int(_rng(cfg, _ENCODER_STREAM).integers(2 ** 32)))
        if cfg.prompt_init == "text":
            initial_prompts = initial_features @ np.linalg.pinv(encoder.weight)
        else:
            prompt_seed = int(_rng(cfg, _PROMPT_STREAM).integers(2 ** 32))
            initial_prompts = random_prompts(cfg.n_classes, cfg.prompt_dim, seed=prompt_seed)
        initial_features = encoder.encode(initial_prompts)

    return World(
        prototypes=prototypes,
        samples=samples,
        labels=labels,
        initial_features=initial_features,
        encoder=encoder,
        initial_prompts=initial_prompts,
    )


def nearest_prototype(world: World) -> np.ndarray:
    """Label of the most cosine-similar prototype for every sample"""
    return np.argmax(world.samples @ world.prototypes.T, axis=1)


def baseline_accuracy(world: World) -> float:
    """Zero-shot accuracy of the untuned initial class features"""
    if world.n_samples == 0:
        return 0.0
    units = normalize(world.initial_features).data
    predicted = np.argmax(world.samples @ units.T, axis=1)
    return float(np.mean(predicted == world.labels))
