"""
Report writers for evaluation results.

Each writer renders an EvalReport as text in one format. Writers are
registered by name so the command line can pick one with --format.
"""
from typing import Callable, Dict

from ..metrics.report import EvalReport

# Registry of report writers by format name
REPORT_WRITERS: Dict[str, Callable[[EvalReport], str]] = {}


def register_report_writer(name: str, writer: Callable[[EvalReport], str]) -> None:
    """
    Register a report writer for a format.

    Args:
        name: The name of the format
        writer: Function rendering a report as text
    """
    REPORT_WRITERS[name.lower()] = writer


def get_report_writer(name: str) -> Callable[[EvalReport], str]:
    """
    Get the report writer for a format.

    Raises:
        ValueError: If no writer is registered for the format
    """
    writer = REPORT_WRITERS.get(name.lower())
    if not writer:
        raise ValueError(f"No report writer registered for format: {name}")
    return writer


from .csv_report import write_csv_report
register_report_writer("csv", write_csv_report)

from .table_report import write_table_report
register_report_writer("table", write_table_report)
