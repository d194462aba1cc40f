"""
Closed-form gradient-norm laws for a single pair (e_i, e_j):

    || d cos(e_i, e_j) / d e_i ||   = |sin theta| / ||e_i||
    || d theta(e_i, e_j) / d e_i || = 1 / ||e_i||          (theta strictly inside (0, pi))
"""
from pathlib import Path
from typing import Iterable, NamedTuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from services.errors import ClampBand, ZeroNormRow
from services.geometry.hypersphere import ROW_NORM_FLOOR

ANGULAR_BAND = 1.0 - 1e-6


class GradNormCheck(NamedTuple):
    measured_norm: float
    predicted_norm: float


def _pair(e_i, e_j):
    e_i = np.asarray(e_i, dtype=np.float64).ravel()
    e_j = np.asarray(e_j, dtype=np.float64).ravel()
    r_i, r_j = np.linalg.norm(e_i), np.linalg.norm(e_j)
    if r_i <= ROW_NORM_FLOOR:
        raise ZeroNormRow(0)
    if r_j <= ROW_NORM_FLOOR:
        raise ZeroNormRow(1)
    u_i, u_j = e_i / r_i, e_j / r_j
    return u_i, u_j, r_i, float(u_i @ u_j)


def cosine_pair_gradient(e_i, e_j) -> np.ndarray:
    """d cos(e_i, e_j) / d e_i = (u_j - cos * u_i) / ||e_i||"""
    u_i, u_j, r_i, c = _pair(e_i, e_j)
    return (u_j - c * u_i) / r_i


def angle_pair_gradient(e_i, e_j) -> np.ndarray:
    u_i, u_j, r_i, c = _pair(e_i, e_j)
    if abs(c) > ANGULAR_BAND:
        raise ClampBand(c)
    return -(u_j - c * u_i) / (r_i * np.sqrt((1.0 - c) * (1.0 + c)))


def verify_cosine_gradnorm_law(e_i, e_j) -> GradNormCheck:
    _, _, r_i, c = _pair(e_i, e_j)
    measured = np.linalg.norm(cosine_pair_gradient(e_i, e_j))
    predicted = np.sin(np.arccos(np.clip(c, -1.0, 1.0))) / r_i
    return GradNormCheck(float(measured), float(predicted))


def verify_angular_gradnorm_law(e_i, e_j) -> GradNormCheck:
    """Raises ClampBand when |cos| is within 1e-6 of 1 (the law is singular there)"""
    _, _, r_i, _ = _pair(e_i, e_j)
    measured = np.linalg.norm(angle_pair_gradient(e_i, e_j))
    return GradNormCheck(float(measured), float(1.0 / r_i))


def gradnorm_curve(angles: Iterable[float]) -> pd.DataFrame:
    """Both gradient norms for a unit pair in the plane, swept over `angles` (radians)"""
    rows = []
    for theta in angles:
        theta = float(theta)
        e_i = np.array([1.0, 0.0])
        e_j = np.array([np.cos(theta), np.sin(theta)])
        rows.append({
            "theta_radians": theta,
            "cosine_gradnorm": verify_cosine_gradnorm_law(e_i, e_j).measured_norm,
            "angular_gradnorm": verify_angular_gradnorm_law(e_i, e_j).measured_norm,
        })
    return pd.DataFrame(rows, columns=["theta_radians", "cosine_gradnorm", "angular_gradnorm"])


def write_gradnorm_curve(curve: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(path, index=False, float_format="%.6f")
    return path


class LawSweepReport(BaseModel):
    n_pairs: int
    dim: int
    max_cosine_rel_error: float
    max_angular_rel_error: float
    angular_norm_std: float


def _random_pair(rng: np.random.Generator, dim: int, norm_i: float):
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    w = rng.standard_normal(dim)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    # angles drawn uniformly, away from the singular endpoints
    theta = rng.uniform(0.01, np.pi - 0.01)
    e_j = (np.cos(theta) * u + np.sin(theta) * w) * rng.uniform(0.5, 2.0)
    return norm_i * u, e_j


def law_sweep(n_pairs: int = 1000, dim: int = 8, seed: int = 0, norm_i: float = 1.0) -> LawSweepReport:
    """Check both laws on random pairs with a fixed ||e_i||"""
    rng = np.random.default_rng(seed)
    cos_errors, ang_errors, ang_norms = [], [], []
    for _ in range(n_pairs):
        e_i, e_j = _random_pair(rng, dim, norm_i)
        cos_check = verify_cosine_gradnorm_law(e_i, e_j)
        ang_check = verify_angular_gradnorm_law(e_i, e_j)
        cos_errors.append(abs(cos_check.measured_norm - cos_check.predicted_norm) / (1.0 + cos_check.predicted_norm))
        ang_errors.append(abs(ang_check.measured_norm - ang_check.predicted_norm) / ang_check.predicted_norm)
        ang_norms.append(ang_check.measured_norm)

    return LawSweepReport(
        n_pairs=n_pairs,
        dim=dim,
        max_cosine_rel_error=float(max(cos_errors, default=0.0)),
        max_angular_rel_error=float(max(ang_errors, default=0.0)),
        angular_norm_std=float(np.std(ang_norms)) if ang_norms else 0.0,
    )
