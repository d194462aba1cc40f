"""
Reliability-diagram data, confidence histogram and a self-contained SVG rendering
"""
from pathlib import Path
from typing import List, Union

import pandas as pd

from services.calibration.metrics import CalibrationReport

RELIABILITY_COLUMNS = ["bin_center", "accuracy", "mean_confidence", "count"]
HISTOGRAM_COLUMNS = ["lower", "upper", "count"]

_SIZE = 400
_MARGIN = 50


def reliability_data(report: CalibrationReport) -> pd.DataFrame:
    """One row per non-empty bin"""
    rows = [
        {
            "bin_center": (b.lower + b.upper) / 2.0,
            "accuracy": b.accuracy,
            "mean_confidence": b.mean_confidence,
            "count": b.count,
        }
        for b in report.bins
        if b.count > 0
    ]
    return pd.DataFrame(rows, columns=RELIABILITY_COLUMNS)


def confidence_histogram(report: CalibrationReport) -> pd.DataFrame:
    """Record count in every bin, empty ones included"""
    rows = [{"lower": b.lower, "upper": b.upper, "count": b.count} for b in report.bins]
    return pd.DataFrame(rows, columns=HISTOGRAM_COLUMNS)


def _x(value: float) -> float:
    return _MARGIN + value * _SIZE


def _y(value: float) -> float:
    return _MARGIN + (1.0 - value) * _SIZE


def render_reliability_svg(report: CalibrationReport, title: str = "Reliability diagram") -> str:
    """
    Bars show per-bin accuracy, shaded boxes the gap to mean confidence, and the dashed
    diagonal the perfectly calibrated line. Output depends only on the report.
    """
    width = height = _SIZE + 2 * _MARGIN
    bar = _SIZE / report.n_bins
    parts: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{title}</title>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SIZE}" height="{_SIZE}" fill="white" stroke="black"/>',
    ]

    for b in report.bins:
        if b.count == 0:
            continue
        x = _x(b.lower)
        top = _y(b.accuracy)
        parts.append(
            f'<rect class="accuracy" x="{x:.3f}" y="{top:.3f}" width="{bar:.3f}" '
            f'height="{_y(0.0) - top:.3f}" fill="#3b6fb6" stroke="#1d3b66"/>'
        )
        lo, hi = sorted((b.accuracy, b.mean_confidence))
        parts.append(
            f'<rect class="gap" x="{x:.3f}" y="{_y(hi):.3f}" width="{bar:.3f}" '
            f'height="{_y(lo) - _y(hi):.3f}" fill="#d9534f" fill-opacity="0.35"/>'
        )

    parts.append(
        f'<line x1="{_x(0.0)}" y1="{_y(0.0)}" x2="{_x(1.0)}" y2="{_y(1.0)}" '
        f'stroke="gray" stroke-dasharray="4 4"/>'
    )
    parts.append(
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="14">Confidence</text>'
    )
    parts.append(
        f'<text x="15" y="{height / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 15 {height / 2})">Accuracy</text>'
    )
    parts.append(
        f'<text x="{_MARGIN + 8}" y="{_MARGIN + 20}" font-size="13">ECE = {100.0 * report.ece:.2f}%</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_reliability_svg(report: CalibrationReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_reliability_svg(report), encoding="utf-8")
    return path
