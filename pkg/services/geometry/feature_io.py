"""
FeatureMatrix CSV persistence: one row per class, D comma-separated columns, no header
"""
from pathlib import Path
from typing import Union

import pandas as pd

from services.geometry.hypersphere import FeatureMatrix

# 17 significant digits round-trip every float64 exactly
FLOAT_FORMAT = "%.17g"


def save_features(features: FeatureMatrix, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(features.data).to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)
    return path


def load_features(path: Union[str, Path]) -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Feature matrix not found: {path}")
    df = pd.read_csv(path, header=None, dtype=float, float_precision="round_trip")
    return FeatureMatrix(df.to_numpy())
