"""
Reference values for small best-packing instances
Closed-form families plus an exhaustive grid search on the circle, used to certify the solver
"""
import math
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from services.errors import ConfigError, UnsupportedDimension

MAX_CIRCLE_POINTS = 8
MIN_GRID_RESOLUTION = 10 ** 4
CASE_COLUMNS = ["n", "d", "optimal_min_angle_radians", "source"]


class CaseSource(str, Enum):
    ANALYTIC = "Analytic"
    BRUTE_FORCE = "BruteForce"


class TammesCase(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2)
    d: int = Field(ge=2)
    optimal_min_angle: float = Field(gt=0.0, le=math.pi)
    source: CaseSource = CaseSource.ANALYTIC

    @property
    def degrees(self) -> float:
        return math.degrees(self.optimal_min_angle)


def antipodal_rule(n: int, d: int) -> Optional[float]:
    """Two points: opposite poles in any dimension"""
    return math.pi if n == 2 else None


def circle_rule(n: int, d: int) -> Optional[float]:
    """Regular n-gon on S^1"""
    if d == 2 and 3 <= n <= MAX_CIRCLE_POINTS:
        return 2.0 * math.pi / n
    return None


def simplex_rule(n: int, d: int) -> Optional[float]:
    """Regular simplex: d + 1 points with pairwise cosine -1/d"""
    return math.acos(-1.0 / d) if n == d + 1 else None


def cross_polytope_rule(n: int, d: int) -> Optional[float]:
    """2d points at +/- the coordinate axes"""
    return math.pi / 2.0 if n == 2 * d else None


RULES = (antipodal_rule, circle_rule, simplex_rule, cross_polytope_rule)


def lookup_case(n: int, d: int) -> Optional[TammesCase]:
    """First closed-form family covering (n, d), or None when no exact value is known here"""
    for rule in RULES:
        value = rule(n, d)
        if value is not None:
            return TammesCase(n=n, d=d, optimal_min_angle=value, source=CaseSource.ANALYTIC)
    return None


def analytic_cases() -> List[TammesCase]:
    """The closed-form reference set, one entry per distinct (n, d)"""
    candidates = [(2, d) for d in (2, 3, 4)]
    candidates += [(n, 2) for n in range(3, MAX_CIRCLE_POINTS + 1)]
    candidates += [(d + 1, d) for d in (2, 3, 4)]
    candidates += [(2 * d, d) for d in (2, 3)]

    cases, seen = [], set()
    for n, d in candidates:
        if (n, d) in seen:
            continue
        seen.add((n, d))
        cases.append(lookup_case(n, d))
    return cases


def brute_force_circle(n: int, grid_resolution: int = MIN_GRID_RESOLUTION, d: int = 2) -> TammesCase:
    """
    Grid search for the best n points on the circle

    Point 0 sits at angle 0 and point 1 at a free gap g; the remaining points split the rest of
    the circle evenly. g runs over 2*pi*k / grid_resolution and the best true minimum pairwise
    circular distance wins.

    Args:
        n: number of points, 2 <= n <= 8
        grid_resolution: grid points over the full turn, at least 10^4
        d: must be 2
    """
    if d != 2:
        raise UnsupportedDimension(d)
    if not 2 <= n <= MAX_CIRCLE_POINTS:
        raise ConfigError(f"brute force on the circle supports 2 <= n <= {MAX_CIRCLE_POINTS}, got {n}")
    if grid_resolution < MIN_GRID_RESOLUTION:
        raise ConfigError(f"grid_resolution must be >= {MIN_GRID_RESOLUTION}, got {grid_resolution}")

    two_pi = 2.0 * math.pi
    gaps = two_pi * np.arange(1, grid_resolution) / grid_resolution
    rest = (two_pi - gaps) / (n - 1)

    # positions[g, i]: angle of point i for free gap g
    positions = np.zeros((gaps.size, n))
    positions[:, 1] = gaps
    for i in range(2, n):
        positions[:, i] = gaps + (i - 1) * rest

    diff = np.abs(positions[:, :, None] - positions[:, None, :])
    circular = np.minimum(diff, two_pi - diff)
    off = ~np.eye(n, dtype=bool)
    min_dist = circular[:, off].min(axis=1)

    best = float(min_dist.max())
    return TammesCase(n=n, d=2, optimal_min_angle=best, source=CaseSource.BRUTE_FORCE)


def cases_frame(cases: Iterable[TammesCase]) -> pd.DataFrame:
    rows = [
        {"n": c.n, "d": c.d, "optimal_min_angle_radians": c.optimal_min_angle, "source": c.source.value}
        for c in cases
    ]
    return pd.DataFrame(rows, columns=CASE_COLUMNS)


def write_cases(cases: Iterable[TammesCase], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cases_frame(cases).to_csv(path, index=False, float_format="%.17g")
    return path
