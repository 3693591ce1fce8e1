"""
Machine-readable CSV reports.
"""
import csv
import io

from ..metrics.report import EvalReport
from .columns import report_cells, report_columns


def write_csv_report(report: EvalReport) -> str:
    """
    Render a report as CSV with one line per row; empty cells mark metrics
    that do not apply (e.g. velocities of a pose-only baseline).
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["name", "n_frames"] + [header for _, header in report_columns()])
    for row, values in zip(report.rows, report_cells(report)):
        writer.writerow([row.name, row.n_frames] + ["" if value is None else repr(value) for value in values])
    return buffer.getvalue()
