"""
Evaluation reports combining ADD-AUC and the registered RMSE metrics.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .pose_metrics import ADD_AUC_THRESHOLD, PoseTrace, add_auc, add_errors, rmse
from .registry import MetricRegistry


class TraceErrors(NamedTuple):
    """RMSE errors of one trace pair, in cm, deg, cm/s and deg/s."""
    e_t: float
    e_a: float
    e_v: Optional[float]
    e_omega: Optional[float]


def rmse_traces(est: PoseTrace, gt: PoseTrace) -> TraceErrors:
    """
    RMSE position, orientation and velocity errors of aligned traces.

    Velocity errors are None when either trace lacks velocities.

    Raises:
        DimensionMismatchError: If the traces differ in length
    """
    values = {}
    for name in ("rmse_e_t", "rmse_e_a", "rmse_e_v", "rmse_e_omega"):
        metric = MetricRegistry.get_metric_class(name)
        values[name] = metric.compute(est, gt) if metric.applies_to(est, gt) else None
    return TraceErrors(values["rmse_e_t"], values["rmse_e_a"], values["rmse_e_v"], values["rmse_e_omega"])


@dataclass
class ReportRow:
    """
    Scores of one object, or of several pooled together.

    Attributes:
        name: Object or aggregate name
        n_frames: Number of evaluated frames
        add_auc: ADD-AUC in percent
        values: RMSE metrics by registered name, None when not applicable
    """
    name: str
    n_frames: int
    add_auc: float
    values: Dict[str, Optional[float]] = field(default_factory=dict)


@dataclass(eq=False)
class EvalReport:
    """
    Per-object rows, an optional pooled row, and the per-frame error traces
    behind them (keyed by object, then by "add" or metric name).
    """
    rows: List[ReportRow]
    traces: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    threshold_max: float = ADD_AUC_THRESHOLD

    @property
    def aggregate(self) -> ReportRow:
        """The pooled row when present, otherwise the only row."""
        return self.rows[-1]

    def row(self, name: str) -> ReportRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)


def evaluate_traces(est: PoseTrace, gt: PoseTrace, model_points: np.ndarray, name: str = "object",
                    threshold_max: float = ADD_AUC_THRESHOLD) -> EvalReport:
    """
    Score an estimate trace against ground truth.

    Args:
        est: Estimated trace
        gt: Ground-truth trace on the same frames
        model_points: Object points for ADD (object frame)
        name: Row name
        threshold_max: Upper end of the ADD threshold sweep (m)

    Returns:
        A single-row report
    """
    per_frame = {"add": add_errors(est, gt, model_points)}
    values: Dict[str, Optional[float]] = {}
    for metric_name in MetricRegistry.metric_names():
        metric = MetricRegistry.get_metric_class(metric_name)
        if metric.applies_to(est, gt):
            per_frame[metric_name] = metric.errors(est, gt)
            values[metric_name] = rmse(per_frame[metric_name])
        else:
            values[metric_name] = None
    row = ReportRow(name, len(est), add_auc(per_frame["add"], threshold_max), values)
    return EvalReport([row], {name: per_frame}, threshold_max)


def _unique_name(name: str, taken: Dict[str, object]) -> str:
    candidate, index = name, 2
    while candidate in taken:
        candidate = f"{name}_{index}"
        index += 1
    return candidate


def combine_reports(reports: Sequence[EvalReport], name: Optional[str] = "all") -> EvalReport:
    """
    Merge the per-object rows of several reports and append a row pooling all their frames.

    Pooled values are recomputed from the concatenated per-frame errors, not
    averaged over objects. Rows that share a name are kept apart with a
    numeric suffix ("box", "box_2"); pooled rows of the inputs are dropped
    since they carry no per-frame errors of their own.

    Args:
        reports: Reports to merge, in row order
        name: Name of the pooled row, or None to merge without pooling

    Raises:
        ValueError: If there is nothing to combine or the reports use different ADD thresholds
    """
    if not reports:
        raise ValueError("No reports to combine")
    threshold_max = reports[0].threshold_max
    if any(report.threshold_max != threshold_max for report in reports):
        raise ValueError("Reports with different ADD thresholds cannot be combined")
    rows: List[ReportRow] = []
    traces: Dict[str, Dict[str, np.ndarray]] = {}
    for report in reports:
        for row in report.rows:
            if row.name not in report.traces:
                continue
            unique = _unique_name(row.name, traces)
            rows.append(replace(row, name=unique))
            traces[unique] = report.traces[row.name]
    if name is None:
        return EvalReport(rows, traces, threshold_max)

    pooled_add = np.concatenate([trace["add"] for trace in traces.values()])
    values: Dict[str, Optional[float]] = {}
    for metric_name in MetricRegistry.metric_names():
        if all(metric_name in trace for trace in traces.values()):
            values[metric_name] = rmse(np.concatenate([trace[metric_name] for trace in traces.values()]))
        else:
            values[metric_name] = None
    rows.append(ReportRow(_unique_name(name, traces), len(pooled_add), add_auc(pooled_add, threshold_max), values))
    return EvalReport(rows, traces, threshold_max)
