"""
Report emission: CSV rows for tables, JSON for the full record.
"""
import logging
from enum import Enum
from pathlib import Path
from typing import Union

import pandas as pd

from src.coneweyl.cli.schemas import REPORT_COLUMNS, WeylReport
from src.coneweyl.errors import DomainError, FileError

logger = logging.getLogger(__name__)

COUNT_COLUMNS = ["count_plus", "count_minus", "bracket_lower", "bracket_upper"]


class ReportFormat(str, Enum):
    CSV = "CSV"
    JSON = "JSON"


def report_frame(report: WeylReport) -> pd.DataFrame:
    """Rows as a table with nullable integer count columns."""
    records = [row.model_dump(by_alias=True) for row in report.rows]
    frame = pd.DataFrame.from_records(records, columns=REPORT_COLUMNS)
    for column in COUNT_COLUMNS:
        frame[column] = frame[column].astype("Int64")
    return frame


def write_report(report: WeylReport, fmt: Union[ReportFormat, str], path: Union[str, Path]) -> Path:
    try:
        fmt = ReportFormat(fmt.upper() if isinstance(fmt, str) else fmt)
    except ValueError:
        raise DomainError(f"Unknown report format {fmt!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == ReportFormat.CSV:
            report_frame(report).to_csv(path, index=False)
        else:
            path.write_text(report.model_dump_json(by_alias=True, indent=2))
    except OSError as e:
        raise FileError(f"Could not write report to {path}: {e}")
    logger.info("Wrote %s report to %s", fmt.value, path)
    return path


def read_report(path: Union[str, Path]) -> WeylReport:
    """Load a JSON report written by write_report."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise FileError(f"Could not read report {path}: {e}")
    return WeylReport.model_validate_json(text)


def read_report_csv(path: Union[str, Path]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={column: "Int64" for column in COUNT_COLUMNS})
    except (OSError, pd.errors.ParserError) as e:
        raise FileError(f"Could not read report {path}: {e}")
    return frame
