"""Cumulative campaign scoring across replicates, plus temporal curves.

Merged findings are re-deduplicated through the same matching + resolution
pipeline rather than unioning per-run assignments: cross-run repeats must
compete for the same ground-truth entry so they surface as duplicates instead
of extra true positives.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import DataError
from .gt_store import DEFAULT_SEVERITY_BANDS, GroundTruthSet, SeverityBand, severity_points
from .ingest import Finding, RunRecord
from .judge import JudgeCache, JudgeConfig, candidate_matches
from .metrics import MetricsReport, RATIO_METRICS, compute_metrics
from .resolve import Resolution, resolve


@dataclass(frozen=True)
class OverlapReport:
    """Shared/exclusive assigned ground-truth ids between runs."""

    run_ids: tuple[str, ...]
    matrix: tuple[tuple[int, ...], ...]  # diagonal = per-run tp
    exclusive: dict[str, int]
    union_size: int

    def to_obj(self) -> dict:
        return {
            "run_ids": list(self.run_ids),
            "matrix": [list(row) for row in self.matrix],
            "exclusive": dict(self.exclusive),
            "union_size": self.union_size,
        }


@dataclass(frozen=True)
class CumulativeResult:
    setup: str
    target_id: str
    k: int
    run_ids: tuple[str, ...]
    merged_resolution: Resolution
    metrics: MetricsReport
    per_run_metrics: tuple[MetricsReport, ...]
    per_run_resolutions: tuple[Resolution, ...]
    delta_pct: dict[str, float | None]
    delta_excluded: dict[str, int]
    tp_overlap: OverlapReport | None
    provenance: tuple[tuple[str, int], ...]  # merged index -> (run_id, original index)


def merge_findings(runs: Sequence[RunRecord]) -> tuple[list[Finding], list[tuple[str, int]]]:
    """Concatenate run findings, re-indexing and keeping provenance."""
    merged: list[Finding] = []
    provenance: list[tuple[str, int]] = []
    for run in runs:
        for finding in run.findings:
            provenance.append((run.run_id, finding.index))
            merged.append(replace(finding, index=len(merged)))
    return merged, provenance


def delta_vs_mean(
    cumulative: MetricsReport, per_run: Sequence[MetricsReport]
) -> dict[str, float | None]:
    """Cumulative-minus-mean per ratio metric, in percentage points.

    Undefined per-run values are excluded from the mean (counts via
    :func:`delta_exclusions`); if a side is wholly undefined the delta is
    undefined.
    """
    deltas: dict[str, float | None] = {}
    for metric in RATIO_METRICS:
        cum = cumulative.ratio(metric)
        values = [m.ratio(metric) for m in per_run]
        defined = [v for v in values if v is not None]
        if cum is None or not defined:
            deltas[metric] = None
        else:
            deltas[metric] = 100.0 * (cum - sum(defined) / len(defined))
    return deltas


def delta_exclusions(per_run: Sequence[MetricsReport]) -> dict[str, int]:
    """How many per-run values were undefined and left out of each delta mean."""
    return {
        metric: sum(1 for m in per_run if m.ratio(metric) is None)
        for metric in RATIO_METRICS
    }


def tp_overlap(
    run_ids: Sequence[str], resolutions: Sequence[Resolution]
) -> OverlapReport:
    """Pairwise intersection of assigned ground-truth id sets."""
    if len(run_ids) < 2:
        raise DataError("tp_overlap requires at least 2 runs")
    if len(run_ids) != len(resolutions):
        raise DataError("run_ids and resolutions must align")
    assigned = [frozenset(gt_id for _, gt_id in r.assignment) for r in resolutions]
    k = len(run_ids)
    matrix = tuple(
        tuple(len(assigned[i] & assigned[j]) for j in range(k)) for i in range(k)
    )
    union: set[str] = set().union(*assigned) if assigned else set()
    exclusive = {
        run_ids[i]: len(assigned[i] - set().union(*(assigned[j] for j in range(k) if j != i)))
        for i in range(k)
    }
    return OverlapReport(
        run_ids=tuple(run_ids),
        matrix=matrix,
        exclusive=exclusive,
        union_size=len(union),
    )


def cumulate(
    runs: Sequence[RunRecord],
    gts: GroundTruthSet,
    judge_config: JudgeConfig,
    *,
    backend=None,
    cache: JudgeCache | None = None,
    bands: Sequence[SeverityBand] = DEFAULT_SEVERITY_BANDS,
) -> CumulativeResult:
    """Merge k runs of one setup+target and score them as a single campaign."""
    if not runs:
        raise DataError("cumulate requires at least one run")
    setups = {r.setup for r in runs}
    targets = {r.target_id for r in runs}
    if len(targets) > 1:
        raise DataError(f"cumulate requires a single target, got {sorted(targets)}")
    if len(setups) > 1:
        raise DataError(f"cumulate requires a single setup, got {sorted(setups)}")

    ordered = sorted(runs, key=lambda r: r.replicate)
    merged, provenance = merge_findings(ordered)

    merged_match = candidate_matches(judge_config, merged, gts, backend=backend, cache=cache)
    merged_resolution = resolve(
        merged_match.edges,
        len(merged),
        gts,
        judge_errors=[(e.finding_index, e.gt_id) for e in merged_match.errors],
    )
    total_duration = sum(r.duration for r in ordered)
    total_cost = sum(r.cost for r in ordered)
    merged_metrics = compute_metrics(
        merged_resolution,
        gts,
        bands=bands,
        duration=total_duration,
        cost=total_cost,
        scope="cumulative",
    )

    per_run_metrics: list[MetricsReport] = []
    per_run_resolutions: list[Resolution] = []
    for run in ordered:
        match = candidate_matches(judge_config, run.findings, gts, backend=backend, cache=cache)
        resolution = resolve(
            match.edges,
            len(run.findings),
            gts,
            judge_errors=[(e.finding_index, e.gt_id) for e in match.errors],
        )
        per_run_resolutions.append(resolution)
        per_run_metrics.append(
            compute_metrics(
                resolution, gts, bands=bands, duration=run.duration, cost=run.cost
            )
        )

    overlap = None
    if len(ordered) >= 2:
        overlap = tp_overlap([r.run_id for r in ordered], per_run_resolutions)

    return CumulativeResult(
        setup=ordered[0].setup,
        target_id=ordered[0].target_id,
        k=len(ordered),
        run_ids=tuple(r.run_id for r in ordered),
        merged_resolution=merged_resolution,
        metrics=merged_metrics,
        per_run_metrics=tuple(per_run_metrics),
        per_run_resolutions=tuple(per_run_resolutions),
        delta_pct=delta_vs_mean(merged_metrics, per_run_metrics),
        delta_excluded=delta_exclusions(per_run_metrics),
        tp_overlap=overlap,
        provenance=tuple(provenance),
    )


# ---------------------------------------------------------------------------
# Temporal discovery curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimelinePoint:
    t: float  # seconds since run start
    cumulative_tp: int
    cumulative_fp: int
    cumulative_severity: int
    cumulative_cwe: int


def timeline(
    run: RunRecord,
    resolution: Resolution,
    gts: GroundTruthSet,
    *,
    bands: Sequence[SeverityBand] = DEFAULT_SEVERITY_BANDS,
) -> list[TimelinePoint]:
    """Per-finding cumulative discovery series in timestamp order.

    Findings without timestamps sort after all timestamped ones (they cannot
    inflate early-discovery curves) and are placed at the end of the run.
    """
    assigned = dict(resolution.assignment)

    def sort_key(f: Finding):
        if f.timestamp is None:
            return (1, 0.0, f.index)
        return (0, f.timestamp.timestamp(), f.index)

    ordered = sorted(run.findings, key=sort_key)

    points: list[TimelinePoint] = []
    tp = fp = severity = 0
    cwes: set[str] = set()
    last_t = 0.0
    for finding in ordered:
        if finding.timestamp is not None and run.started_at is not None:
            t = max(0.0, (finding.timestamp - run.started_at).total_seconds())
        elif finding.timestamp is None:
            t = max(run.duration, last_t)
        else:
            t = last_t
        t = max(t, last_t)
        last_t = t
        if finding.index in resolution.tp_findings:
            tp += 1
            entry = gts.entry(assigned[finding.index])
            severity += severity_points(entry.cvss, bands)
            if entry.cwe:
                cwes.add(entry.cwe)
        elif finding.index in resolution.fp_findings:
            fp += 1
        points.append(TimelinePoint(t, tp, fp, severity, len(cwes)))
    return points


def timeline_csv(points: Sequence[TimelinePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t_seconds", "tp", "fp", "severity", "cwe"])
    for p in points:
        writer.writerow([f"{p.t:.3f}", p.cumulative_tp, p.cumulative_fp,
                         p.cumulative_severity, p.cumulative_cwe])
    return buf.getvalue()
