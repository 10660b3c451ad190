"""Detection metrics computed from a resolved assignment.

Zero-denominator ratios are reported as None (an explicit "undefined"
sentinel), never silently coerced to 0 or 1; aggregation excludes undefined
values and reports how many were excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .gt_store import DEFAULT_SEVERITY_BANDS, GroundTruthSet, SeverityBand, severity_points
from .resolve import Resolution, classify_counts

RATIO_METRICS = ("precision", "recall", "f1", "f0.5")

_METRIC_ALIASES = {
    "precision": "precision",
    "recall": "recall",
    "f1": "f1",
    "f0.5": "f0.5",
    "f0_5": "f0.5",
}


def canonical_metric(name: str) -> str:
    try:
        return _METRIC_ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown metric {name!r} (expected one of {RATIO_METRICS})")


def metric_from_counts(tp: int, fp: int, fn: int, metric: str) -> float | None:
    """Compute one ratio metric from counts; None when undefined."""
    metric = canonical_metric(metric)
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    if metric == "precision":
        return precision
    if metric == "recall":
        return recall
    if precision is None or recall is None or (precision == 0 and recall == 0):
        return None
    if metric == "f1":
        return 2 * precision * recall / (precision + recall)
    return 1.25 * precision * recall / (0.25 * precision + recall)


@dataclass(frozen=True)
class MetricsReport:
    """All scoring metrics for one evaluation scope."""

    tp: int
    fp: int
    fn: int
    dup: int
    precision: float | None
    recall: float | None
    f1: float | None
    f0_5: float | None
    severity_score: int
    cwe_coverage: int
    duration: float | None = None
    cost: float | None = None
    scope: str = "run"

    def ratio(self, metric: str) -> float | None:
        metric = canonical_metric(metric)
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "f0.5": self.f0_5,
        }[metric]

    def to_obj(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "dup": self.dup,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "f0.5": self.f0_5,
            "severity_score": self.severity_score,
            "cwe_coverage": self.cwe_coverage,
            "duration": self.duration,
            "cost": self.cost,
            "scope": self.scope,
        }


def compute_metrics(
    r: Resolution,
    gts: GroundTruthSet,
    *,
    bands: Sequence[SeverityBand] = DEFAULT_SEVERITY_BANDS,
    duration: float | None = None,
    cost: float | None = None,
    scope: str = "run",
) -> MetricsReport:
    counts = classify_counts(r)
    tp, fp, fn, dup = counts["tp"], counts["fp"], counts["fn"], counts["dup"]

    assigned_entries = [gts.entry(gt_id) for _, gt_id in sorted(r.assignment)]
    severity = sum(severity_points(e.cvss, bands) for e in assigned_entries)
    cwes = {e.cwe for e in assigned_entries if e.cwe}

    return MetricsReport(
        tp=tp,
        fp=fp,
        fn=fn,
        dup=dup,
        precision=metric_from_counts(tp, fp, fn, "precision"),
        recall=metric_from_counts(tp, fp, fn, "recall"),
        f1=metric_from_counts(tp, fp, fn, "f1"),
        f0_5=metric_from_counts(tp, fp, fn, "f0.5"),
        severity_score=severity,
        cwe_coverage=len(cwes),
        duration=duration,
        cost=cost,
        scope=scope,
    )


AGGREGATE_FIELDS = (
    "tp", "fp", "fn", "dup",
    "precision", "recall", "f1", "f0.5",
    "severity_score", "cwe_coverage", "duration", "cost",
)


@dataclass(frozen=True)
class Aggregate:
    mean: float | None
    sd: float | None
    n_used: int
    n_excluded: int

    def to_obj(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "n_used": self.n_used,
            "n_excluded": self.n_excluded,
        }


def _field_value(report: MetricsReport, name: str) -> float | None:
    if name == "f0.5":
        return report.f0_5
    return getattr(report, name)


def aggregate_runs(reports: Sequence[MetricsReport]) -> dict[str, Aggregate]:
    """Per-metric mean and sample (n-1) standard deviation across runs.

    Undefined values are excluded per metric, with the exclusion count kept
    visible; the sd is undefined for fewer than two usable values.
    """
    if not reports:
        raise ValueError("aggregate_runs requires at least one report")
    out: dict[str, Aggregate] = {}
    for name in AGGREGATE_FIELDS:
        values = [_field_value(r, name) for r in reports]
        used = [float(v) for v in values if v is not None]
        excluded = len(values) - len(used)
        if not used:
            out[name] = Aggregate(None, None, 0, excluded)
            continue
        mean = sum(used) / len(used)
        if len(used) >= 2:
            var = sum((v - mean) ** 2 for v in used) / (len(used) - 1)
            sd = math.sqrt(var)
        else:
            sd = None
        out[name] = Aggregate(mean, sd, len(used), excluded)
    return out
