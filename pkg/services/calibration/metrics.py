"""
Calibration metrics over prediction logs: ECE, SCE, MCE and weighted aggregation across datasets.

Bins are equal-width and half-open, (lower, upper], so confidence 1.0 falls in the top bin and
a record with confidence c lands in bin ceil(c * n_bins).
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.errors import EmptyLog, EmptySet, MalformedLog, RaggedProbabilities

PROB_SUM_TOL = 1e-9
DEFAULT_BINS = 15


def check_probability_vector(probs: Sequence[float], true_class: int) -> None:
    if not probs:
        raise MalformedLog("empty probability vector")
    if any(not math.isfinite(p) or p < 0.0 for p in probs):
        raise MalformedLog("probabilities must be finite and non-negative")
    if abs(math.fsum(probs) - 1.0) > PROB_SUM_TOL:
        raise MalformedLog(f"probabilities sum to {math.fsum(probs)!r}, not 1")
    if not 0 <= true_class < len(probs):
        raise MalformedLog(f"true class {true_class} outside {len(probs)} classes")


class PredictionRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    probabilities: Tuple[float, ...]
    predicted: int = Field(ge=0)
    true_class: int = Field(ge=0)
    confidence: float = Field(gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _consistent(self):
        check_probability_vector(self.probabilities, self.true_class)
        if self.predicted != int(np.argmax(self.probabilities)):
            raise ValueError(f"predicted class {self.predicted} is not the argmax")
        if self.confidence != max(self.probabilities):
            raise ValueError("confidence must equal the largest probability")
        return self

    @classmethod
    def from_probabilities(cls, probabilities: Sequence[float], true_class: int) -> "PredictionRecord":
        """Derive predicted class (lowest index on ties) and confidence from the vector"""
        probs = tuple(float(p) for p in probabilities)
        check_probability_vector(probs, int(true_class))
        top = int(np.argmax(probs))
        return cls(probabilities=probs, predicted=top, true_class=int(true_class), confidence=probs[top])

    @property
    def correct(self) -> bool:
        return self.predicted == self.true_class


class CalibrationBin(BaseModel):
    lower: float
    upper: float
    count: int
    mean_confidence: float
    accuracy: float


class CalibrationReport(BaseModel):
    n_bins: int
    bins: List[CalibrationBin]
    ece: float = Field(ge=0.0, le=1.0)
    sce: float = Field(ge=0.0, le=1.0)
    mce: float = Field(ge=0.0, le=1.0)
    accuracy: float = Field(ge=0.0, le=1.0)

    @property
    def n_records(self) -> int:
        return sum(b.count for b in self.bins)


def bin_index(confidence: np.ndarray, n_bins: int) -> np.ndarray:
    """0-based bin of each confidence: ceil(c * n_bins) - 1, clipped to the valid range"""
    idx = np.ceil(np.asarray(confidence, dtype=np.float64) * n_bins).astype(int)
    return np.clip(idx, 1, n_bins) - 1


def _binned_gap(confidence: np.ndarray, correct: np.ndarray, n_bins: int):
    """(weighted |acc - conf| sum, max gap, per-bin rows) for one confidence column"""
    total = confidence.size
    idx = bin_index(confidence, n_bins)
    weighted, worst, rows = [], 0.0, []
    for b in range(n_bins):
        members = idx == b
        count = int(members.sum())
        if count == 0:
            rows.append(CalibrationBin(lower=b / n_bins, upper=(b + 1) / n_bins, count=0,
                                       mean_confidence=0.0, accuracy=0.0))
            continue
        conf = math.fsum(confidence[members].tolist()) / count
        acc = math.fsum(correct[members].astype(float).tolist()) / count
        gap = abs(acc - conf)
        weighted.append(count / total * gap)
        worst = max(worst, gap)
        rows.append(CalibrationBin(lower=b / n_bins, upper=(b + 1) / n_bins, count=count,
                                   mean_confidence=conf, accuracy=acc))
    return math.fsum(weighted), worst, rows


def _check(records: Sequence[PredictionRecord], n_bins: int) -> None:
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if not records:
        raise EmptyLog("calibration requested on an empty prediction log")


def compute_sce(records: Sequence[PredictionRecord], n_bins: int = DEFAULT_BINS) -> float:
    """
    Class-wise calibration error: each class column is binned on its own probability with
    correctness = (true_class == k), and the per-class errors are averaged over K
    """
    _check(records, n_bins)
    widths = {len(r.probabilities) for r in records}
    if len(widths) != 1:
        raise RaggedProbabilities(f"probability vectors of differing lengths {sorted(widths)}")

    probs = np.array([r.probabilities for r in records], dtype=np.float64)
    truth = np.array([r.true_class for r in records])
    n_classes = probs.shape[1]

    # a zero entry is clipped into the lowest bin
    per_class = [_binned_gap(probs[:, k], truth == k, n_bins)[0] for k in range(n_classes)]
    return math.fsum(per_class) / n_classes


def compute_ece(records: Sequence[PredictionRecord], n_bins: int = DEFAULT_BINS) -> CalibrationReport:
    """
    Expected calibration error with the full per-bin breakdown

    Args:
        records: non-empty prediction log
        n_bins: number of equal-width bins over (0, 1]

    Returns:
        CalibrationReport carrying ece, sce (same bins), mce and overall accuracy
    """
    _check(records, n_bins)
    confidence = np.array([r.confidence for r in records], dtype=np.float64)
    correct = np.array([r.correct for r in records], dtype=bool)

    ece, mce, rows = _binned_gap(confidence, correct, n_bins)
    accuracy = math.fsum(correct.astype(float).tolist()) / len(records)
    return CalibrationReport(
        n_bins=n_bins,
        bins=rows,
        ece=min(ece, 1.0),
        sce=min(compute_sce(records, n_bins), 1.0),
        mce=min(mce, 1.0),
        accuracy=accuracy,
    )


def weighted_average(per_dataset: Sequence[Tuple[int, float]]) -> float:
    """sum(size * metric) / sum(size) across datasets"""
    if not per_dataset:
        raise EmptySet("weighted average over no datasets")
    sizes = [size for size, _ in per_dataset]
    if any(size <= 0 for size in sizes):
        raise ValueError("dataset sizes must be positive")
    weighted = math.fsum(size * metric for size, metric in per_dataset)
    return weighted / math.fsum(sizes)


def merge_reports(parts: Sequence[CalibrationReport]) -> Optional[CalibrationReport]:
    """
    Combine reports computed on disjoint shards of one log with the same bin count

    Integer counts are summed exactly and bin means re-weighted, so the merged ECE equals the
    ECE of the concatenated log. SCE cannot be recovered from shard summaries and is set to the
    count-weighted shard average.
    """
    if not parts:
        return None
    n_bins = {p.n_bins for p in parts}
    if len(n_bins) != 1:
        raise ValueError("cannot merge reports with different bin counts")
    n_bins = n_bins.pop()

    total = sum(p.n_records for p in parts)
    rows, weighted, worst = [], [], 0.0
    for b in range(n_bins):
        shard_bins = [p.bins[b] for p in parts]
        count = sum(sb.count for sb in shard_bins)
        if count == 0:
            rows.append(shard_bins[0].model_copy(update={"count": 0, "mean_confidence": 0.0, "accuracy": 0.0}))
            continue
        conf = math.fsum(sb.mean_confidence * sb.count for sb in shard_bins) / count
        acc = math.fsum(sb.accuracy * sb.count for sb in shard_bins) / count
        gap = abs(acc - conf)
        weighted.append(count / total * gap)
        worst = max(worst, gap)
        rows.append(shard_bins[0].model_copy(update={"count": count, "mean_confidence": conf, "accuracy": acc}))

    return CalibrationReport(
        n_bins=n_bins,
        bins=rows,
        ece=min(math.fsum(weighted), 1.0),
        sce=weighted_average([(p.n_records, p.sce) for p in parts]),
        mce=worst,
        accuracy=weighted_average([(p.n_records, p.accuracy) for p in parts]),
    )
