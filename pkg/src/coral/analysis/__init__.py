from .stats import confidence_interval, student_t_cdf, welch_t_test
from .curves import RunCurve, aggregate_channel, ice_curve, load_runs, smooth_curve
from .ttt import TTTResult, time_to_threshold
from .report import analyze_directory

__all__ = [
    "confidence_interval",
    "welch_t_test",
    "student_t_cdf",
    "RunCurve",
    "load_runs",
    "smooth_curve",
    "aggregate_channel",
    "ice_curve",
    "TTTResult",
    "time_to_threshold",
    "analyze_directory",
]
