"""Result containers shared by the estimators and the verification harness."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

PASS = "pass"
FAIL = "fail"
HYPOTHESIS_NOT_MET = "hypothesis-not-met"
INFORMATIONAL = "informational"

VERDICTS = (PASS, FAIL, HYPOTHESIS_NOT_MET, INFORMATIONAL)

CSV_COLUMNS = (
    "theorem_id", "model", "n", "k", "lhs", "lhs_stderr", "rhs", "ratio", "verdict", "seed",
)


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo point estimate.

    ``ci95`` is ``mean +- 1.96 * stderr`` for sample means; proportions carry a
    Wilson interval and medians an order-statistic interval instead.
    """

    mean: float
    stderr: float
    ci95: tuple[float, float]
    count: int
    seed: int
    stat_id: str

    @classmethod
    def from_moments(cls, mean: float, stderr: float, count: int, seed: int, stat_id: str) -> Estimate:
        return cls(mean, stderr, (mean - 1.96 * stderr, mean + 1.96 * stderr), count, seed, stat_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "stat": self.stat_id,
            "mean": self.mean,
            "stderr": self.stderr,
            "ci95": list(self.ci95),
            "count": self.count,
            "seed": self.seed,
        }


@dataclass
class BoundReport:
    """One evaluated inequality instance.

    ``lhs`` is the side that is estimated (or the smaller analytic side),
    ``rhs`` the bound it is compared with, and ``ratio`` is ``lhs / rhs``
    unless a check documents otherwise in ``tolerance_policy``.
    """

    theorem_id: str
    model: str
    n: int
    k: float | None
    lhs: float
    lhs_stderr: float
    rhs: float
    ratio: float
    verdict: str
    tolerance_policy: str
    seed: int | None = None
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def failed(self) -> bool:
        return self.verdict == FAIL

    def sort_key(self) -> tuple:
        return (self.theorem_id, self.model, self.n, -1.0 if self.k is None else float(self.k))

    def row(self) -> list[str]:
        return [
            self.theorem_id,
            self.model,
            str(self.n),
            "" if self.k is None else _fmt(self.k),
            _fmt(self.lhs),
            _fmt(self.lhs_stderr),
            _fmt(self.rhs),
            _fmt(self.ratio),
            self.verdict,
            "" if self.seed is None else str(self.seed),
        ]

    def to_dict(self) -> dict[str, Any]:
        out = dict(zip(CSV_COLUMNS, self.row()))
        out["tolerance_policy"] = self.tolerance_policy
        out["details"] = self.details
        return out


def _fmt(x: float) -> str:
    # repr-level precision; locale independent
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def reports_to_csv(reports: Iterable[BoundReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow(rep.row())
    return buf.getvalue()


def one_sided_verdict(lhs: float, rhs: float, slack: float) -> str:
    """``pass`` iff ``lhs <= rhs + slack``."""
    return PASS if lhs <= rhs + slack else FAIL


def window_verdict(value: float, window: tuple[float, float] | None) -> str:
    if window is None:
        return INFORMATIONAL
    lo, hi = window
    return PASS if lo <= value <= hi else FAIL
