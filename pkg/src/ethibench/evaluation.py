"""Shared evaluation orchestration and report files.

Reports separate a deterministic ``payload`` block (hashable, byte-stable for
identical inputs) from a ``meta`` block holding timestamps and tool version.
File names embed the ground-truth version so re-evaluation after a revision
creates new reports instead of mutating old ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .campaign import CumulativeResult, TimelinePoint, timeline, timeline_csv
from .errors import ReportError
from .gt_store import DEFAULT_SEVERITY_BANDS, GroundTruthSet, SeverityBand
from .ingest import RunRecord
from .judge import JudgeCache, JudgeConfig, MatchResult, candidate_matches
from .metrics import MetricsReport, aggregate_runs, compute_metrics
from .resolve import Resolution, resolve
from .timefmt import format_instant, now_utc


@dataclass(frozen=True)
class EvaluationResult:
    run: RunRecord
    gt_version: int
    match: MatchResult
    resolution: Resolution
    metrics: MetricsReport
    timeline: tuple[TimelinePoint, ...]


def evaluate_run(
    run: RunRecord,
    gts: GroundTruthSet,
    judge_config: JudgeConfig,
    *,
    backend=None,
    cache: JudgeCache | None = None,
    bands: Sequence[SeverityBand] = DEFAULT_SEVERITY_BANDS,
) -> EvaluationResult:
    """Run the matching, resolution, scoring, and timeline stages for one run."""
    match = candidate_matches(judge_config, run.findings, gts, backend=backend, cache=cache)
    resolution = resolve(
        match.edges,
        len(run.findings),
        gts,
        judge_errors=[(e.finding_index, e.gt_id) for e in match.errors],
    )
    report = compute_metrics(
        resolution, gts, bands=bands, duration=run.duration, cost=run.cost
    )
    points = timeline(run, resolution, gts, bands=bands)
    return EvaluationResult(
        run=run,
        gt_version=gts.version,
        match=match,
        resolution=resolution,
        metrics=report,
        timeline=tuple(points),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def run_report_payload(result: EvaluationResult, judge_config: JudgeConfig) -> dict:
    res = result.resolution
    return {
        "kind": "run_evaluation",
        "run_id": result.run.run_id,
        "setup": result.run.setup,
        "target_id": result.run.target_id,
        "replicate": result.run.replicate,
        "ground_truth_version": result.gt_version,
        "judge": judge_config.descriptor(),
        "counts": {
            "tp": result.metrics.tp,
            "fp": result.metrics.fp,
            "fn": result.metrics.fn,
            "dup": result.metrics.dup,
        },
        "metrics": result.metrics.to_obj(),
        "assignment": [[f, g] for f, g in sorted(res.assignment)],
        "fp_findings": sorted(res.fp_findings),
        "dup_findings": sorted(res.dup_findings),
        "fn_gt_ids": sorted(res.fn_gt_ids),
        "edges": [
            [e.finding_index, e.gt_id, e.rationale] for e in result.match.edges
        ],
        "judge_errors": [
            [e.finding_index, e.gt_id, e.reason] for e in result.match.errors
        ],
        "findings": [f.to_obj() for f in result.run.findings],
    }


def campaign_report_payload(
    c: CumulativeResult, judge_config: JudgeConfig, version: int | None = None
) -> dict:
    return {
        "kind": "campaign",
        "setup": c.setup,
        "target_id": c.target_id,
        "ground_truth_version": version,
        "k": c.k,
        "run_ids": list(c.run_ids),
        "judge": judge_config.descriptor(),
        "cumulative": c.metrics.to_obj(),
        "per_run": [m.to_obj() for m in c.per_run_metrics],
        "delta_pct": c.delta_pct,
        "delta_excluded": c.delta_excluded,
        "overlap": c.tp_overlap.to_obj() if c.tp_overlap else None,
        "merged_counts": {
            "tp": c.metrics.tp,
            "fp": c.metrics.fp,
            "fn": c.metrics.fn,
            "dup": c.metrics.dup,
        },
    }


def render_report(payload: dict) -> str:
    """Serialize a report with the deterministic payload separated from
    volatile metadata."""
    document = {
        "payload": payload,
        "meta": {
            "generated_at": format_instant(now_utc()),
            "tool_version": __version__,
        },
    }
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def payload_bytes(payload: dict) -> bytes:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False).encode("utf-8")


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def reports_dir(data_dir: Path, target_id: str) -> Path:
    return Path(data_dir) / "reports" / target_id


def run_report_path(data_dir: Path, target_id: str, run_id: str, version: int) -> Path:
    return reports_dir(data_dir, target_id) / f"{run_id}.v{version}.json"


def timeline_path(data_dir: Path, target_id: str, run_id: str, version: int) -> Path:
    return reports_dir(data_dir, target_id) / f"{run_id}.v{version}.timeline.csv"


def campaign_report_path(data_dir: Path, target_id: str, setup: str, version: int) -> Path:
    return reports_dir(data_dir, target_id) / f"campaign.{setup}.v{version}.json"


def write_run_report(
    data_dir: Path, result: EvaluationResult, judge_config: JudgeConfig
) -> Path:
    out_dir = reports_dir(data_dir, result.run.target_id)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = run_report_path(
        data_dir, result.run.target_id, result.run.run_id, result.gt_version
    )
    path.write_text(
        render_report(run_report_payload(result, judge_config)), encoding="utf-8"
    )
    timeline_path(
        data_dir, result.run.target_id, result.run.run_id, result.gt_version
    ).write_text(timeline_csv(result.timeline), encoding="utf-8")
    return path


def write_campaign_report(
    data_dir: Path, c: CumulativeResult, judge_config: JudgeConfig, version: int
) -> Path:
    out_dir = reports_dir(data_dir, c.target_id)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = campaign_report_path(data_dir, c.target_id, c.setup, version)
    path.write_text(
        render_report(campaign_report_payload(c, judge_config, version)), encoding="utf-8"
    )
    return path


def load_report(path: Path) -> dict:
    if not path.exists():
        raise ReportError(f"report not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReportError(f"malformed report {path}: {exc}") from exc


def latest_run_reports(data_dir: Path, target_id: str) -> dict[str, dict]:
    """Latest-version run report document per run_id for a target."""
    out: dict[str, tuple[int, dict]] = {}
    directory = reports_dir(data_dir, target_id)
    if not directory.is_dir():
        return {}
    for path in directory.glob("*.v*.json"):
        if path.name.startswith("campaign.") or path.name.startswith("index."):
            continue
        doc = load_report(path)
        payload = doc.get("payload", {})
        run_id = payload.get("run_id")
        version = int(payload.get("ground_truth_version", 0))
        if run_id and (run_id not in out or version > out[run_id][0]):
            out[run_id] = (version, doc)
    return {run_id: doc for run_id, (_, doc) in sorted(out.items())}


def write_index_report(
    data_dir: Path,
    target_id: str,
    version: int,
    results: Sequence[EvaluationResult],
) -> Path:
    """Aggregate index over a batch of run evaluations (mean/sd per metric)."""
    aggregate = aggregate_runs([r.metrics for r in results])
    payload = {
        "kind": "evaluation_index",
        "target_id": target_id,
        "ground_truth_version": version,
        "runs": [r.run.run_id for r in results],
        "aggregate": {k: v.to_obj() for k, v in aggregate.items()},
    }
    out_dir = reports_dir(data_dir, target_id)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"index.v{version}.json"
    path.write_text(render_report(payload), encoding="utf-8")
    return path
