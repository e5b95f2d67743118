"""Fixed-format text summaries of verify, sweep and minimize output."""

import logging
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from gurlab.core import CheckResult, InequalityReport, RelationName
from gurlab.csv_writer import read_records_csv, read_sweep_csv
from gurlab.searcher import SearchResult, SweepTable
from gurlab.storage import Record, StorageError, detect_kind, load_search_result, load_sweep, read_records_jsonl

logger = logging.getLogger(__name__)

SATURATION_RTOL = 1e-6


@dataclass(frozen=True)
class SlackEntry:
    """One evaluated relation reduced to what the summary tables need."""

    relation: str
    descriptor: str
    lhs: float
    rhs: float
    slack: float
    holds: bool

    @property
    def family(self) -> str:
        return self.descriptor.split("(", 1)[0]

    @property
    def saturated(self) -> bool:
        scale = max(abs(self.lhs), abs(self.rhs))
        return abs(self.slack) <= SATURATION_RTOL * scale if scale > 0 else self.slack == 0


def entries_from_reports(reports: Iterable[InequalityReport]) -> list[SlackEntry]:
    return [SlackEntry(r.name.value, r.state_descriptor, r.lhs, r.rhs, r.slack, r.holds) for r in reports]


def entries_from_sweep_rows(rows: list[dict[str, str]]) -> list[SlackEntry]:
    """Slack entries from raw sweep CSV rows (columns ``<relation>[<variant>].slack``)."""
    entries: list[SlackEntry] = []
    for row in rows:
        for column, cell in row.items():
            if not column.endswith(".slack") or cell == "":
                continue
            prefix = column.removesuffix(".slack")
            entries.append(
                SlackEntry(
                    relation=prefix.split("[", 1)[0],
                    descriptor=row["descriptor"],
                    lhs=float(row[f"{prefix}.lhs"]),
                    rhs=float(row[f"{prefix}.rhs"]),
                    slack=float(cell),
                    holds=row[f"{prefix}.holds"] == "true",
                )
            )
    return entries


def _fmt(value: float) -> str:
    return f"{value:.6e}"


def relation_table(entries: list[SlackEntry]) -> list[str]:
    """One row per relation name: count, failures, min slack (``n/a`` if never evaluated)."""
    by_relation: dict[str, list[SlackEntry]] = defaultdict(list)
    for entry in entries:
        by_relation[entry.relation].append(entry)
    lines = [f"{'relation':<18} {'count':>7} {'fail':>5} {'min slack':>14}  worst state"]
    for name in RelationName:
        group = by_relation.get(name.value, [])
        if not group:
            lines.append(f"{name.value:<18} {0:>7} {0:>5} {'n/a':>14}")
            continue
        worst = min(group, key=lambda e: (e.slack, e.descriptor))
        failures = sum(1 for e in group if not e.holds)
        lines.append(f"{name.value:<18} {len(group):>7} {failures:>5} {_fmt(worst.slack):>14}  {worst.descriptor}")
    return lines


def saturation_table(entries: list[SlackEntry]) -> list[str]:
    """Per family: evaluated relations, how many are saturated, the smallest slack."""
    by_family: dict[str, list[SlackEntry]] = defaultdict(list)
    for entry in entries:
        by_family[entry.family].append(entry)
    lines = [f"{'family':<28} {'count':>7} {'saturated':>9} {'min slack':>14}  relation"]
    for family in sorted(by_family):
        group = by_family[family]
        worst = min(group, key=lambda e: (e.slack, e.relation))
        saturated = sum(1 for e in group if e.saturated)
        lines.append(f"{family:<28} {len(group):>7} {saturated:>9} {_fmt(worst.slack):>14}  {worst.relation}")
    return lines


def check_table(checks: list[CheckResult]) -> list[str]:
    by_name: dict[str, list[CheckResult]] = defaultdict(list)
    for check in checks:
        by_name[check.name].append(check)
    lines = [f"{'check':<24} {'count':>7} {'fail':>5} {'max value':>14}"]
    for name in sorted(by_name):
        group = by_name[name]
        failures = sum(1 for c in group if not c.passed)
        lines.append(f"{name:<24} {len(group):>7} {failures:>5} {_fmt(max(c.value for c in group)):>14}")
    return lines


def summarize_records(records: list[Record]) -> str:
    reports = [r for r in records if isinstance(r, InequalityReport)]
    checks = [r for r in records if isinstance(r, CheckResult)]
    entries = entries_from_reports(reports)
    lines = ["Relations", *relation_table(entries), "", "Saturation by family", *saturation_table(entries)]
    if checks:
        lines += ["", "Checks", *check_table(checks)]
    return "\n".join(lines) + "\n"


def summarize_sweep_entries(family: str, points: int, entries: list[SlackEntry], skipped: dict[str, str]) -> str:
    lines = [f"Sweep of {family} over {points} points", "", *relation_table(entries)]
    lines += ["", "Saturation by family", *saturation_table(entries)]
    if skipped:
        lines += ["", "Skipped"]
        lines += [f"  {name}: {reason}" for name, reason in sorted(skipped.items())]
    return "\n".join(lines) + "\n"


def summarize_sweep(table: SweepTable) -> str:
    entries = entries_from_reports(r for row in table.rows for r in row.reports)
    skipped = table.rows[0].skipped if table.rows else {}
    return summarize_sweep_entries(table.family.value, len(table.rows), entries, skipped)


def summarize_search(result: SearchResult) -> str:
    """Searcher minimum next to its bound, the HUR reference and the ħ/4, ħ/8, ħ/2 marks."""
    hbar = result.problem.hbar
    params = ", ".join(f"{name}={value:.9g}" for name, value in zip(result.param_names, result.best_params, strict=True))
    lines = [
        f"Minimum of {result.problem.objective} over {result.problem.family} "
        f"(seed {result.seed}, {result.evaluations}/{result.budget} evaluations)",
        f"best parameters: {params}",
        "",
        f"{'objective':<20} {'best':>14} {'bound':>14} {'HUR':>14} {'ħ/4':>14} {'ħ/8':>14} {'ħ/2':>14}",
        f"{result.problem.objective.value:<20} {_fmt(result.best_value):>14} {_fmt(result.bound):>14} "
        f"{_fmt(result.hur_reference):>14} {_fmt(hbar / 4):>14} {_fmt(hbar / 8):>14} {_fmt(hbar / 2):>14}",
        "",
        f"bound respected: {'yes' if result.best_value >= result.bound - result.tol else 'NO'}",
        f"flat objective: {'yes' if result.flat else 'no'} (value range {_fmt(result.value_range)})",
    ]
    return "\n".join(lines) + "\n"


def summarize_file(path: Path) -> str:
    """Detect the kind of an output file and summarize it.

    Raises:
        StorageError: If the file is missing, corrupt or of unknown kind.
    """
    kind = detect_kind(path)
    logger.debug(f"{path} detected as {kind} output")
    if kind == "search":
        return summarize_search(load_search_result(path))
    if kind == "sweep":
        if path.suffix == ".csv":
            rows = read_sweep_csv(path)
            if not rows:
                raise StorageError(f"{path} has no rows")
            skipped = dict(
                item.split(": ", 1) for item in rows[0].get("skipped", "").split("; ") if ": " in item
            )
            return summarize_sweep_entries(rows[0]["family"], len(rows), entries_from_sweep_rows(rows), skipped)
        return summarize_sweep(load_sweep(path))
    records = read_records_csv(path) if path.suffix == ".csv" else read_records_jsonl(path)
    return summarize_records(records)
