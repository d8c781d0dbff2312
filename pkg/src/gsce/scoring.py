"""Success rate and completeness of a transition log against ground truth."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from gsce.dronesim import StateTransition, normalize_yaw

ERROR_CATEGORIES = (
    None,
    "NoCode",
    "ParseError",
    "UnknownFunction",
    "RuntimeError",
    "StepLimitExceeded",
    "LLMError",
)
REPORT_COLUMNS = ("method", "model", "k", "cot", "constraint_impl", "runs", "SR", "completeness")


@dataclass(frozen=True)
class Tolerance:
    pos_eps: float = 0.1
    yaw_eps: float = 1.0

    def __post_init__(self):
        if not (self.pos_eps > 0 and self.yaw_eps > 0):
            raise ValueError("tolerances must be positive")


DEFAULT_TOLERANCE = Tolerance()


def transitions_match(a: StateTransition, b: StateTransition, tol: Tolerance = DEFAULT_TOLERANCE) -> bool:
    return (
        abs(a.dx - b.dx) <= tol.pos_eps
        and abs(a.dy - b.dy) <= tol.pos_eps
        and abs(a.dz - b.dz) <= tol.pos_eps
        and abs(normalize_yaw(a.dyaw - b.dyaw)) <= tol.yaw_eps
    )


def is_noop(t: StateTransition, tol: Tolerance = DEFAULT_TOLERANCE) -> bool:
    return (
        abs(t.dx) < tol.pos_eps
        and abs(t.dy) < tol.pos_eps
        and abs(t.dz) < tol.pos_eps
        and abs(normalize_yaw(t.dyaw)) < tol.yaw_eps
    )


def filter_noops(log: Iterable[StateTransition], tol: Tolerance = DEFAULT_TOLERANCE) -> list[StateTransition]:
    return [t for t in log if not is_noop(t, tol)]


def lcs_length(actual: Sequence[StateTransition], gt: Sequence[StateTransition], tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    """Longest common subsequence under the tolerant match relation."""
    prev = [0] * (len(gt) + 1)
    for a in actual:
        cur = [0] * (len(gt) + 1)
        for j, g in enumerate(gt, start=1):
            if transitions_match(a, g, tol):
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def prefix_length(actual: Sequence[StateTransition], gt: Sequence[StateTransition], tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    n = 0
    for a, g in zip(actual, gt):
        if not transitions_match(a, g, tol):
            break
        n += 1
    return n


def score_run(
    actual: Sequence[StateTransition],
    gt: Sequence[StateTransition],
    tol: Tolerance = DEFAULT_TOLERANCE,
    completeness_mode: str = "lcs",
) -> tuple[bool, float]:
    """Return ``(success, completeness)``.

    ``actual`` should already have no-ops removed. Success needs an
    index-by-index match of equal-length sequences. Completeness is the
    matched fraction of ground truth, by LCS (default) or by matching prefix.
    """
    if not gt:
        raise ValueError("ground truth must not be empty")
    success = len(actual) == len(gt) and all(transitions_match(a, g, tol) for a, g in zip(actual, gt))
    if completeness_mode == "lcs":
        matched = lcs_length(actual, gt, tol)
    elif completeness_mode == "prefix":
        matched = prefix_length(actual, gt, tol)
    else:
        raise ValueError(f"unknown completeness mode {completeness_mode!r}")
    return success, matched / len(gt)


# -- results ----------------------------------------------------------------


@dataclass
class RunResult:
    task_id: str
    method: str
    model: str
    k: int
    cot: bool
    constraint_impl: bool
    repeat_index: int
    success: bool
    completeness: float
    error_category: str | None = None
    error_message: str | None = None
    actual_transitions: list[list[float]] = field(default_factory=list)
    response_ref: str | None = None

    def __post_init__(self):
        if self.error_category not in ERROR_CATEGORIES:
            raise ValueError(f"unknown error category {self.error_category!r}")
        if self.success and (self.completeness != 1.0 or self.error_category is not None):
            raise ValueError("a successful run must be error-free with completeness 1.0")

    def sort_key(self) -> tuple:
        return (self.task_id, self.method, self.model, self.k, self.cot, self.constraint_impl, self.repeat_index)

    def cell_key(self) -> tuple:
        return (self.method, self.model, self.k, self.cot, self.constraint_impl)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> RunResult:
        return cls(**d)


def write_results(results: Iterable[RunResult], path) -> None:
    ordered = sorted(results, key=RunResult.sort_key)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in ordered:
            fh.write(r.to_json() + "\n")


def read_results(path) -> list[RunResult]:
    with open(path, encoding="utf-8") as fh:
        return [RunResult.from_dict(json.loads(line)) for line in fh if line.strip()]


# -- aggregation ------------------------------------------------------------


@dataclass(frozen=True)
class ReportCell:
    method: str
    model: str
    k: int
    cot: bool
    constraint_impl: bool
    runs: int
    successes: int
    completeness_sum: float

    @property
    def sr(self) -> float:
        return self.successes / self.runs

    @property
    def completeness(self) -> float:
        return self.completeness_sum / self.runs


@dataclass
class AggregateReport:
    cells: list[ReportCell] = field(default_factory=list)

    @property
    def total_runs(self) -> int:
        return sum(c.runs for c in self.cells)


def aggregate(results: Iterable[RunResult]) -> AggregateReport:
    groups: dict[tuple, list[RunResult]] = {}
    for r in results:
        groups.setdefault(r.cell_key(), []).append(r)
    cells = []
    for key in sorted(groups):
        rs = groups[key]
        # sort before summing so the float total does not depend on input order
        comp = sum(sorted(r.completeness for r in rs))
        cells.append(ReportCell(*key, runs=len(rs), successes=sum(r.success for r in rs), completeness_sum=comp))
    return AggregateReport(cells)


def pct(x: float) -> str:
    return f"{100 * x:.1f}%"


def _rows(report: AggregateReport) -> list[dict]:
    return [
        {
            "method": c.method,
            "model": c.model,
            "k": c.k,
            "cot": c.cot,
            "constraint_impl": c.constraint_impl,
            "runs": c.runs,
            "SR": pct(c.sr),
            "completeness": pct(c.completeness),
        }
        for c in report.cells
    ]


def render_report(report: AggregateReport, fmt: str = "markdown") -> str:
    rows = _rows(report)
    if fmt == "markdown":
        out = ["| " + " | ".join(REPORT_COLUMNS) + " |", "|" + "---|" * len(REPORT_COLUMNS)]
        for row in rows:
            out.append("| " + " | ".join(_cell_text(row[c]) for c in REPORT_COLUMNS) + " |")
        return "\n".join(out) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in rows:
            w.writerow([_cell_text(row[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        payload = []
        for row in rows:
            item = dict(row)
            item["SR"] = float(row["SR"].rstrip("%"))
            item["completeness"] = float(row["completeness"].rstrip("%"))
            payload.append(item)
        return json.dumps({"unit": "percent", "cells": payload}, indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def _cell_text(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    return str(v)
