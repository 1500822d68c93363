"""
Report rows - the CSV contract shared by every experiment

Header: experiment,schedule_value,distance,residual,tolerance,pass
Floats carry 9 significant digits; rows are rounded on construction so a
written file parses back into identical rows.
"""
import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

from app.services.convergence_stats import ConvergenceReport
from app.services.errors import DomainError

CSV_HEADER = ("experiment", "schedule_value", "distance", "residual", "tolerance", "pass")
SIGNIFICANT_DIGITS = 9


def round_significant(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    return float(format_float(value))


def format_float(value: Optional[float]) -> str:
    """9 significant digits; empty for missing values"""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


@dataclass(frozen=True)
class ReportRow:
    """One schedule entry, or the summary row when schedule_value is None"""
    experiment: str
    schedule_value: Optional[float]
    distance: float
    residual: Optional[float]
    tolerance: float
    passed: bool

    def __post_init__(self):
        object.__setattr__(self, "schedule_value", round_significant(self.schedule_value))
        object.__setattr__(self, "distance", round_significant(self.distance))
        object.__setattr__(self, "residual", round_significant(self.residual))
        object.__setattr__(self, "tolerance", round_significant(self.tolerance))

    @property
    def is_summary(self) -> bool:
        return self.schedule_value is None

    def to_fields(self) -> List[str]:
        return [
            self.experiment,
            format_float(self.schedule_value),
            format_float(self.distance),
            format_float(self.residual),
            format_float(self.tolerance),
            "true" if self.passed else "false",
        ]


def rows_from_report(experiment: str, report: ConvergenceReport) -> List[ReportRow]:
    """One row per schedule entry in schedule order, then the summary row"""
    residuals = report.residuals or [None] * len(report.distances)
    rows = [
        ReportRow(
            experiment=experiment,
            schedule_value=value,
            distance=distance,
            residual=residual,
            tolerance=report.tolerance,
            passed=distance <= report.tolerance,
        )
        for value, distance, residual in zip(report.schedule, report.distances, residuals)
    ]
    rows.append(ReportRow(
        experiment=experiment,
        schedule_value=None,
        distance=report.final_distance,
        residual=report.final_residual,
        tolerance=report.tolerance,
        passed=report.passed,
    ))
    return rows


def render_report(rows: Iterable[ReportRow]) -> str:
    rows = list(rows)
    if not rows:
        raise DomainError("Report has no rows")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.to_fields())
    return buffer.getvalue()


def emit_report(rows: Iterable[ReportRow], path: str) -> str:
    """
    Write rows as CSV to path.

    Raises:
        DomainError: if there are no rows
        OSError: if the path cannot be written
    """
    text = render_report(rows)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return path


def _parse_float(field: str) -> Optional[float]:
    return None if field == "" else float(field)


def parse_report(text: str) -> List[ReportRow]:
    """Inverse of render_report"""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise DomainError(f"Not a report: header {header!r}")
    rows = []
    for fields in reader:
        if not fields:
            continue
        experiment, schedule_value, distance, residual, tolerance, passed = fields
        rows.append(ReportRow(
            experiment=experiment,
            schedule_value=_parse_float(schedule_value),
            distance=float(distance),
            residual=_parse_float(residual),
            tolerance=float(tolerance),
            passed=passed == "true",
        ))
    return rows


def read_report(path: str) -> List[ReportRow]:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_report(f.read())
