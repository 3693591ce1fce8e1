"""
Evaluation metrics: ADD-AUC and RMSE pose and velocity errors.
"""
from .pose_metrics import (
    ADD_AUC_THRESHOLD, PoseTrace, add_error, add_errors, add_auc, rmse,
    translation_errors, angular_errors, velocity_errors, angular_velocity_errors,
)
from .registry import MetricRegistry, TraceMetric
from .report import EvalReport, ReportRow, TraceErrors, rmse_traces, evaluate_traces, combine_reports
