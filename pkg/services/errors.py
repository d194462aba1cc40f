"""
Exception hierarchy for AngleSage
"""
from typing import Optional


class AngleSageError(Exception):
    """Base class for every error raised by the library"""


class ConfigError(AngleSageError, ValueError):
    """Invalid configuration or arguments"""


class ZeroNormRow(AngleSageError, ValueError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"Row {index} has (near) zero L2 norm and cannot be normalized")


class TooFewPoints(AngleSageError, ValueError):
    def __init__(self, n: int):
        self.n = n
        super().__init__(f"At least 2 points are required, got {n}")


class DegenerateProbability(AngleSageError, ValueError):
    """Probability vector with entries at/below the floor, or not summing to one"""


class NonFiniteGradient(AngleSageError, ValueError):
    """Gradient contains NaN or Inf"""


class ShapeMismatch(AngleSageError, ValueError):
    """Two arrays that must agree in shape do not"""


class ClampBand(AngleSageError, ValueError):
    """Pair lies inside the arccos clamp band where the angle gradient law breaks down"""

    def __init__(self, cosine: float):
        self.cosine = cosine
        super().__init__(f"|cos| = {abs(cosine):.12f} lies inside the clamp band")


class EmptyLog(AngleSageError, ValueError):
    """Calibration requested on an empty prediction log"""


class RaggedProbabilities(AngleSageError, ValueError):
    """Probability vectors of differing lengths in one log"""


class EmptySet(AngleSageError, ValueError):
    """Aggregation over an empty collection"""


class UnsupportedDimension(AngleSageError, ValueError):
    def __init__(self, d: int):
        self.d = d
        super().__init__(f"Dimension {d} is not supported by this oracle (only d = 2)")


class MalformedLog(AngleSageError, ValueError):
    """Prediction log CSV that cannot be parsed"""

    def __init__(self, reason: str, line: Optional[int] = None):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"Malformed prediction log, {where}{reason}")
