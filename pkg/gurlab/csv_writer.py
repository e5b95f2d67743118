"""CSV exports of report streams, sweep tables and searcher traces.

Floats are written with ``repr`` so every cell parses back to the same double.
"""

import csv
import json
from collections.abc import Iterable
from io import StringIO
from pathlib import Path
from typing import Any, TextIO

from pydantic import ValidationError

from gurlab.core import CheckResult, GurError, InequalityReport
from gurlab.searcher import SearchResult, SweepTable
from gurlab.storage import Record, StorageError, decode_non_finite, encode_non_finite

# Shared by relation and check records; cells that do not apply stay empty
RECORD_HEADERS = [
    "kind",
    "name",
    "variant",
    "state_descriptor",
    "n",
    "engine",
    "lhs",
    "rhs",
    "slack",
    "holds",
    "tol",
    "value",
    "passed",
    "sub_values",
]

REPORT_FIELDS = ("lhs", "rhs", "slack", "holds")


def _format_value(value: object) -> str:
    """Format a value for CSV output."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def record_to_row(record: Record) -> list[str]:
    """Convert a report or check to a CSV row in RECORD_HEADERS order."""
    data: dict[str, Any] = record.model_dump()
    extra = data.pop("details", None) if isinstance(record, CheckResult) else data.pop("sub_values")
    data["sub_values"] = json.dumps(encode_non_finite(extra or {}), sort_keys=True, allow_nan=False)
    return [_format_value(data.get(header)) for header in RECORD_HEADERS]


def _write_records(records: Iterable[Record], f: TextIO) -> None:
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(RECORD_HEADERS)
    for record in records:
        writer.writerow(record_to_row(record))


def write_records_csv(records: list[Record], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        _write_records(records, f)


def records_to_csv_string(records: list[Record]) -> str:
    output = StringIO()
    _write_records(records, output)
    return output.getvalue()


def _parse_bool(cell: str) -> bool:
    if cell not in ("true", "false"):
        raise ValueError(f"expected true/false, got {cell!r}")
    return cell == "true"


def row_to_record(row: dict[str, str]) -> Record:
    """Inverse of :func:`record_to_row`."""
    extra = decode_non_finite(json.loads(row["sub_values"] or "{}"))
    if row["kind"] == "check":
        return CheckResult(
            name=row["name"],  # type: ignore[arg-type]
            state_descriptor=row["state_descriptor"],
            value=float(row["value"]),
            tol=float(row["tol"]),
            passed=_parse_bool(row["passed"]),
            details=extra,
        )
    if row["kind"] != "relation":
        raise ValueError(f"unknown record kind {row['kind']!r}")
    return InequalityReport.model_validate(
        {
            "name": row["name"],
            "variant": row["variant"],
            "n": int(row["n"]),
            "engine": row["engine"],
            "lhs": float(row["lhs"]),
            "rhs": float(row["rhs"]),
            "slack": float(row["slack"]),
            "holds": _parse_bool(row["holds"]),
            "tol": float(row["tol"]),
            "sub_values": extra,
            "state_descriptor": row["state_descriptor"],
        }
    )


def read_records_csv(path: Path) -> list[Record]:
    try:
        with path.open("r", newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
    except FileNotFoundError as e:
        raise StorageError(f"no such file: {path}") from e
    records: list[Record] = []
    for number, row in enumerate(rows, start=2):
        try:
            records.append(row_to_record(row))
        except (KeyError, ValueError, ValidationError, GurError) as e:
            raise StorageError(f"{path}:{number}: corrupt record: {e}") from e
    return records


def _column_prefix(report: InequalityReport) -> str:
    return f"{report.name}[{report.variant}]" if report.variant else report.name.value


def sweep_headers(table: SweepTable) -> list[str]:
    """family, descriptor, parameters, moment entries, then per-report fields and sub-values."""
    headers = ["family", "descriptor", *table.param_names]
    seen: set[str] = set(headers)

    def add(column: str) -> None:
        if column not in seen:
            seen.add(column)
            headers.append(column)

    for row in table.rows:
        for key in row.moments:
            add(key)
    for row in table.rows:
        for report in row.reports:
            prefix = _column_prefix(report)
            for field in REPORT_FIELDS:
                add(f"{prefix}.{field}")
            for key in report.sub_values:
                add(f"{prefix}.{key}")
    add("skipped")
    return headers


def _sweep_rows(table: SweepTable) -> Iterable[list[str]]:
    headers = sweep_headers(table)
    for row in table.rows:
        cells: dict[str, object] = {"family": table.family.value, "descriptor": row.descriptor}
        cells.update(row.params)
        cells.update(row.moments)
        for report in row.reports:
            prefix = _column_prefix(report)
            for field in REPORT_FIELDS:
                cells[f"{prefix}.{field}"] = getattr(report, field)
            for key, value in report.sub_values.items():
                cells[f"{prefix}.{key}"] = value
        cells["skipped"] = "; ".join(f"{name}: {reason}" for name, reason in sorted(row.skipped.items()))
        yield [_format_value(cells.get(header)) for header in headers]


def _write_sweep(table: SweepTable, f: TextIO) -> None:
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(sweep_headers(table))
    writer.writerows(_sweep_rows(table))


def write_sweep_csv(table: SweepTable, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        _write_sweep(table, f)


def sweep_to_csv_string(table: SweepTable) -> str:
    output = StringIO()
    _write_sweep(table, output)
    return output.getvalue()


def read_sweep_csv(path: Path) -> list[dict[str, str]]:
    """Raw sweep rows keyed by column name."""
    try:
        with path.open("r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or reader.fieldnames[0] != "family":
                raise StorageError(f"{path} is not a sweep table")
            return list(reader)
    except FileNotFoundError as e:
        raise StorageError(f"no such file: {path}") from e


def write_trace_csv(result: SearchResult, path: Path) -> None:
    """One row per objective evaluation: index, parameters, value, diagnostic."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["index", *result.param_names, "value", "diagnostic"])
        for index, point in enumerate(result.trace):
            writer.writerow(
                [str(index), *(_format_value(v) for v in point.params), _format_value(point.value), point.diagnostic]
            )
