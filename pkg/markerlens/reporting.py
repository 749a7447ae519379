"""
Report model and renderers for region-test results.

Three formats share one set of numbers:
  table - markdown tables via tabulate, 6 significant digits, p < 1e-16 shown as "<1e-16"
  csv   - one row per (test, k, marker), CombinedMarkerScore last, full-precision floats
  json  - the csv rows plus a summary, undefined values as null and infinities as "inf"/"-inf"
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

from .exceptions import DomainError
from .hypothesis import DEFAULT_LEVEL, MarkerTestRow, TestResult
from .regions import RegionKind

logger = logging.getLogger(__name__)

P_VALUE_FLOOR = 1e-16
FORMATS = ("table", "csv", "json")

DETAIL_COLUMNS = ["test", "k", "marker", "mean_a", "mean_b", "n_a", "n_b", "t", "df", "p_value", "result"]
SUMMARY_COLUMNS = ["test", "k", "mean_a", "mean_b", "n_a", "n_b", "t", "df", "p_value", "result"]

# Column captions per region kind: (set A, set B)
SET_CAPTIONS = {
    RegionKind.TOP_K: ("Reference", "Test"),
    RegionKind.BOTTOM_K: ("Reference", "Test"),
    RegionKind.MOVERS: ("Up-movers", "Down-movers"),
}


def _value(x: Optional[float]) -> float:
    return float("nan") if x is None else float(x)


def _row_values(result: TestResult, row: MarkerTestRow) -> List[Any]:
    welch = row.result
    return [result.kind.label, result.k, row.marker, welch.mean_a, welch.mean_b, welch.n_a, welch.n_b,
            _value(welch.t), _value(welch.df), _value(welch.p), row.outcome.value]


@dataclass
class Report:
    """
    Results of one comparison run.

    ``notes`` carries reconciliation messages shown above the human table.
    """

    results: List[TestResult]
    level: float = DEFAULT_LEVEL
    notes: List[str] = field(default_factory=list)

    def summary_frame(self) -> pd.DataFrame:
        """One row per (test, k): the CombinedMarkerScore test."""
        rows = []
        for result in self.results:
            values = _row_values(result, result.rows[-1])
            rows.append(values[:2] + values[3:])
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def detail_frame(self) -> pd.DataFrame:
        """One row per (test, k, marker), per-marker rows first, CombinedMarkerScore last."""
        rows = [_row_values(result, row) for result in self.results for row in result.rows]
        return pd.DataFrame(rows, columns=DETAIL_COLUMNS)


def format_number(value: Optional[float]) -> str:
    """Six significant digits; undefined as NaN."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NaN"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6g}"


def format_p_value(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NaN"
    if value < P_VALUE_FLOOR:
        return "<1e-16"
    return f"{value:.6g}"


def _json_value(value: Any) -> Any:
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if hasattr(value, "item"):
        return _json_value(value.item())
    return value


def _frame_records(df: pd.DataFrame) -> List[Dict[str, Any]]:
    return [{col: _json_value(val) for col, val in zip(df.columns, row)} for row in df.itertuples(index=False)]


class ReportRenderer:
    """
    Render reports and plain result tables as table, csv or json text.
    """

    def render(self, report: Report, fmt: str = "table") -> str:
        """
        Render a comparison report.

        Args:
            report: Report to render
            fmt: One of table, csv, json

        Returns:
            Rendered text ending with a newline
        """
        if fmt == "table":
            return self._render_table(report)
        if fmt == "csv":
            return self.frame_to_csv(report.detail_frame())
        if fmt == "json":
            payload = {
                "level": report.level,
                "summary": _frame_records(report.summary_frame()),
                "details": _frame_records(report.detail_frame()),
            }
            return json.dumps(payload, indent=2) + "\n"
        raise DomainError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")

    def render_frame(self, df: pd.DataFrame, fmt: str = "table") -> str:
        """Render any result table (voting curves, sweep tallies) in the requested format."""
        if fmt == "table":
            if df.empty:
                return "| No data available |\n|---|\n"
            return df.to_markdown(index=False, floatfmt=".6g") + "\n"
        if fmt == "csv":
            return self.frame_to_csv(df)
        if fmt == "json":
            return json.dumps(_frame_records(df), indent=2) + "\n"
        raise DomainError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")

    @staticmethod
    def frame_to_csv(df: pd.DataFrame) -> str:
        return df.to_csv(index=False, lineterminator="\n", na_rep="NaN")

    def _render_table(self, report: Report) -> str:
        sections = []
        if report.notes:
            sections.append("\n".join(f"Note: {note}" for note in report.notes))

        for title, kinds in (("Summary (reference vs test)", (RegionKind.TOP_K, RegionKind.BOTTOM_K)),
                             ("Summary (up-movers vs down-movers)", (RegionKind.MOVERS,))):
            results = [r for r in report.results if r.kind in kinds]
            if not results:
                continue
            caption_a, caption_b = SET_CAPTIONS[kinds[0]]
            rows = [[f"{r.kind.label} Test", r.k, format_number(r.combined.mean_a), format_number(r.combined.mean_b),
                     format_p_value(r.combined.p), r.verdict.value] for r in results]
            table = pd.DataFrame(rows, columns=["Test", "K", caption_a, caption_b, "p-value", "Result"])
            sections.append(f"{title}\n\n{table.to_markdown(index=False, disable_numparse=True)}")

        for result in report.results:
            caption_a, caption_b = SET_CAPTIONS[result.kind]
            rows = [[row.marker, format_number(row.result.mean_a), format_number(row.result.mean_b),
                     format_p_value(row.result.p), row.outcome.value] for row in result.rows]
            table = pd.DataFrame(rows, columns=["Marker", f"Avg score {caption_a}", f"Avg score {caption_b}",
                                                "p-value", "Result"])
            sections.append(f"{result.kind.label} Test, k={result.k}\n\n"
                            f"{table.to_markdown(index=False, disable_numparse=True)}")

        return "\n\n".join(sections) + "\n"

