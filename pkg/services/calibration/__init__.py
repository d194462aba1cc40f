from services.calibration.metrics import (
    DEFAULT_BINS,
    CalibrationBin,
    CalibrationReport,
    PredictionRecord,
    bin_index,
    compute_ece,
    compute_sce,
    merge_reports,
    weighted_average,
)
from services.calibration.prediction_log import read_prediction_log, write_prediction_log
from services.calibration.reliability import (
    confidence_histogram,
    reliability_data,
    render_reliability_svg,
    write_reliability_svg,
)
