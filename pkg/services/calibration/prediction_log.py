"""
Prediction-log CSV I/O

Format: header `true_class,p_0,...,p_{K-1}`, one record per line.
"""
import re
from pathlib import Path
from typing import List, Sequence, Union

import pandas as pd
from pandas.errors import EmptyDataError, ParserError

from services.calibration.metrics import PredictionRecord
from services.errors import MalformedLog

_LINE_IN_ERROR = re.compile(r"line (\d+)")


def _expected_header(n_classes: int) -> List[str]:
    return ["true_class"] + [f"p_{k}" for k in range(n_classes)]


def read_prediction_log(path: Union[str, Path]) -> List[PredictionRecord]:
    """Parse a prediction log; MalformedLog carries the 1-based file line of the first bad row"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"prediction log not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[""])
    except EmptyDataError:
        raise MalformedLog("file is empty, expected a header", line=1)
    except ParserError as e:
        match = _LINE_IN_ERROR.search(str(e))
        raise MalformedLog("wrong number of fields", line=int(match.group(1)) if match else None)

    columns = [c.strip() for c in frame.columns]
    if len(columns) < 2 or columns != _expected_header(len(columns) - 1):
        raise MalformedLog(f"header must be true_class,p_0,...,p_K-1 (got {','.join(columns)})", line=1)

    records = []
    for i, row in enumerate(frame.itertuples(index=False)):
        line = i + 2
        values = list(row)
        if any(pd.isna(v) for v in values):
            raise MalformedLog("missing field", line=line)
        try:
            true_class = int(values[0])
            probs = [float(v) for v in values[1:]]
        except ValueError:
            raise MalformedLog("non-numeric field", line=line)
        try:
            records.append(PredictionRecord.from_probabilities(probs, true_class))
        except MalformedLog as e:
            raise MalformedLog(e.reason, line=line)
        except ValueError as e:
            raise MalformedLog(str(e).splitlines()[0], line=line)
    return records


def write_prediction_log(records: Sequence[PredictionRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_classes = len(records[0].probabilities) if records else 1
    rows = [[r.true_class, *r.probabilities] for r in records]
    frame = pd.DataFrame(rows, columns=_expected_header(n_classes))
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
