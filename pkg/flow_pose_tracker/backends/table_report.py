"""
Aligned plain-text tables for terminals and logs.
"""
from ..metrics.report import EvalReport
from .columns import report_cells, report_columns


def write_table_report(report: EvalReport) -> str:
    headers = ["name", "frames"] + [header for _, header in report_columns()]
    lines = []
    for row, values in zip(report.rows, report_cells(report)):
        lines.append([row.name, str(row.n_frames)] + ["-" if value is None else f"{value:.3f}" for value in values])
    widths = [max(len(cell) for cell in column) for column in zip(headers, *lines)]
    rendered = ["  ".join(cell.ljust(width) if i == 0 else cell.rjust(width)
                          for i, (cell, width) in enumerate(zip(line, widths)))
                for line in [headers] + lines]
    rule = "-" * len(rendered[0])
    return "\n".join([rendered[0], rule] + rendered[1:]) + "\n"
