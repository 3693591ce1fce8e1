"""
Column layout shared by the report writers.
"""
from typing import List, Optional, Tuple

from ..metrics.registry import MetricRegistry
from ..metrics.report import EvalReport


def report_columns() -> List[Tuple[str, str]]:
    """(key, header) pairs after the name and frame-count columns."""
    columns = [("add_auc", "add_auc [%]")]
    for name in MetricRegistry.metric_names():
        columns.append((name, f"{name} [{MetricRegistry.get_metric_class(name).unit}]"))
    return columns


def report_cells(report: EvalReport) -> List[List[Optional[float]]]:
    """Per row, the values in report_columns() order; None for non-applicable metrics."""
    cells = []
    for row in report.rows:
        cells.append([row.add_auc] + [row.values.get(name) for name in MetricRegistry.metric_names()])
    return cells
