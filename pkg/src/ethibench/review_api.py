"""HTTP service for the ground-truth maintenance loop.

Exposes unmatched (fp) and duplicate findings from the latest evaluations as
a triage queue, accepts expert decisions, applies ground-truth revisions, and
runs re-evaluation jobs. Endpoints are versioned under /api; there is no
authentication in v1 (deploy behind a trusted network).
"""

from __future__ import annotations

import itertools
import json
import threading
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .campaign import cumulate
from .config import HarnessConfig
from .errors import EthibenchError, GroundTruthError
from .evaluation import (
    evaluate_run,
    latest_run_reports,
    load_report,
    timeline_path,
    write_campaign_report,
    write_run_report,
)
from .gt_store import GroundTruthEntry, GroundTruthRevision, GroundTruthStore
from .ingest import RunRegistry
from .judge import JudgeCache
from .timefmt import format_instant, now_utc


class DecisionBody(BaseModel):
    kind: Literal["confirm_fp", "promote_new_gt", "map_to_existing", "refine_gt"]
    reviewer: str = ""
    gt_id: str | None = None
    entry: dict | None = None
    refined_fields: dict | None = Field(default=None)


class ReviewService:
    """Owns the stores, the triage decision log, and re-evaluation jobs."""

    def __init__(self, config: HarnessConfig):
        self.config = config
        self.gt_store = GroundTruthStore(config.ground_truth_dir)
        self.registry = RunRegistry(config.data_dir)
        self.cache = JudgeCache(config.judge.cache_dir if config.judge.cache_enabled else None)
        self.triage_dir = config.data_dir / "triage"
        self.calibration_dir = config.data_dir / "calibration"
        self.triage_dir.mkdir(parents=True, exist_ok=True)
        self.calibration_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._target_locks: dict[str, threading.Lock] = {}
        self._jobs: dict[str, dict] = {}
        self._job_counter = itertools.count(1)

    # -- decisions ----------------------------------------------------------
    def _decisions_path(self, target_id: str) -> Path:
        return self.triage_dir / f"{target_id}.decisions.jsonl"

    def decisions(self, target_id: str) -> dict[str, dict]:
        path = self._decisions_path(target_id)
        if not path.exists():
            return {}
        out = {}
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    obj = json.loads(line)
                    out[obj["item_id"]] = obj
        return out

    def record_decision(self, target_id: str, decision: dict) -> None:
        with self._decisions_path(target_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(decision, ensure_ascii=False) + "\n")

    def record_label(self, target_id: str, label: dict) -> None:
        path = self.calibration_dir / f"{target_id}.labels.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(label, ensure_ascii=False) + "\n")

    # -- queue ---------------------------------------------------------------
    def queue_items(self, target_id: str) -> list[dict]:
        if not self.gt_store.has_target(target_id):
            raise HTTPException(status_code=404, detail=f"unknown target {target_id!r}")
        reports = latest_run_reports(self.config.data_dir, target_id)
        decided = self.decisions(target_id)
        current = self.gt_store.load(target_id)
        by_id = {e.id: e for e in current.entries}

        docs = sorted(
            reports.values(),
            key=lambda d: (-int(d["payload"].get("ground_truth_version", 0)),
                           d["payload"].get("run_id", "")),
        )
        items: list[dict] = []
        for doc in docs:
            payload = doc["payload"]
            run_id = payload["run_id"]
            edges_by_finding: dict[int, list] = {}
            for fi, gt_id, rationale in payload.get("edges", []):
                edges_by_finding.setdefault(fi, []).append((gt_id, rationale))
            flagged = [(i, "fp") for i in payload.get("fp_findings", [])]
            flagged += [(i, "dup") for i in payload.get("dup_findings", [])]
            for index, classification in sorted(flagged):
                item_id = f"{run_id}:{index}"
                decision = decided.get(item_id)
                candidates = [g for g, _ in edges_by_finding.get(index, [])]
                items.append(
                    {
                        "item_id": item_id,
                        "run_id": run_id,
                        "target_id": target_id,
                        "setup": payload.get("setup", ""),
                        "finding": payload["findings"][index] | {"index": index},
                        "classification": classification,
                        "candidate_gt_ids": candidates,
                        "candidate_entries": [
                            by_id[g].to_obj() for g in candidates if g in by_id
                        ],
                        "edge_rationales": {
                            g: r for g, r in edges_by_finding.get(index, [])
                        },
                        "gt_version": payload.get("ground_truth_version"),
                        "status": "decided" if decision else "pending",
                        "decision": decision,
                    }
                )
        return items

    # -- re-evaluation jobs ---------------------------------------------------
    def _target_lock(self, target_id: str) -> threading.Lock:
        with self._lock:
            return self._target_locks.setdefault(target_id, threading.Lock())

    def latest_evaluated_version(self, target_id: str) -> int:
        reports = latest_run_reports(self.config.data_dir, target_id)
        versions = [
            int(doc["payload"].get("ground_truth_version", 0))
            for doc in reports.values()
        ]
        return max(versions, default=0)

    def start_reevaluation(self, target_id: str) -> dict:
        if not self.gt_store.has_target(target_id):
            raise HTTPException(status_code=404, detail=f"unknown target {target_id!r}")
        current_version = self.gt_store.version(target_id)
        evaluated = self.latest_evaluated_version(target_id)
        if evaluated >= current_version:
            return {
                "status": "noop",
                "notice": (
                    f"ground truth for {target_id!r} is at version {current_version} "
                    f"and evaluations already cover version {evaluated}; nothing to do"
                ),
            }
        job_id = f"job-{next(self._job_counter)}"
        job = {
            "job_id": job_id,
            "target_id": target_id,
            "status": "pending",
            "detail": "",
            "result": None,
        }
        with self._lock:
            self._jobs[job_id] = job
        thread = threading.Thread(
            target=self._run_reevaluation, args=(job_id, target_id), daemon=True
        )
        thread.start()
        return {"job_id": job_id, "status": "pending"}

    def _run_reevaluation(self, job_id: str, target_id: str) -> None:
        job = self._jobs[job_id]
        with self._target_lock(target_id):
            job["status"] = "running"
            try:
                gts = self.gt_store.load(target_id)
                runs = self.registry.list_runs(target_id=target_id)
                evaluated = []
                for run in runs:
                    result = evaluate_run(
                        run,
                        gts,
                        self.config.judge,
                        cache=self.cache,
                        bands=self.config.severity_bands,
                    )
                    write_run_report(self.config.data_dir, result, self.config.judge)
                    evaluated.append(run.run_id)
                for setup in sorted({r.setup for r in runs}):
                    batch = [r for r in runs if r.setup == setup]
                    campaign = cumulate(
                        batch,
                        gts,
                        self.config.judge,
                        cache=self.cache,
                        bands=self.config.severity_bands,
                    )
                    write_campaign_report(
                        self.config.data_dir, campaign, self.config.judge, gts.version
                    )
                job["result"] = {
                    "ground_truth_version": gts.version,
                    "reevaluated_runs": evaluated,
                }
                job["status"] = "done"
            except EthibenchError as exc:
                job["status"] = "failed"
                job["detail"] = str(exc)

    # -- results ---------------------------------------------------------------
    def results(self, target_id: str, setup: str | None = None) -> dict:
        if not self.gt_store.has_target(target_id):
            raise HTTPException(status_code=404, detail=f"unknown target {target_id!r}")
        reports = latest_run_reports(self.config.data_dir, target_id)
        runs = []
        for run_id, doc in reports.items():
            payload = doc["payload"]
            if setup and payload.get("setup") != setup:
                continue
            version = int(payload.get("ground_truth_version", 0))
            points = []
            tl_path = timeline_path(self.config.data_dir, target_id, run_id, version)
            if tl_path.exists():
                lines = tl_path.read_text(encoding="utf-8").strip().splitlines()[1:]
                for line in lines:
                    t, tp, fp, sev, cwe = line.split(",")
                    points.append([float(t), int(tp), int(fp), int(sev), int(cwe)])
            runs.append(
                {
                    "run_id": run_id,
                    "setup": payload.get("setup"),
                    "replicate": payload.get("replicate"),
                    "ground_truth_version": version,
                    "counts": payload.get("counts"),
                    "metrics": payload.get("metrics"),
                    "judge_error_count": len(payload.get("judge_errors", [])),
                    "timeline": points,
                }
            )
        cumulative = []
        directory = self.config.data_dir / "reports" / target_id
        if directory.is_dir():
            latest: dict[str, tuple[int, dict]] = {}
            for path in directory.glob("campaign.*.v*.json"):
                doc = load_report(path)
                payload = doc["payload"]
                version = int(path.stem.rsplit(".v", 1)[1])
                key = payload.get("setup", "")
                if setup and key != setup:
                    continue
                if key not in latest or version > latest[key][0]:
                    latest[key] = (version, payload)
            cumulative = [payload for _, payload in
                          (latest[k] for k in sorted(latest))]
        return {
            "target_id": target_id,
            "ground_truth_version": self.gt_store.version(target_id),
            "runs": runs,
            "cumulative": cumulative,
        }


def create_app(config: HarnessConfig, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="ethibench review api", version="1")
    service = ReviewService(config)
    app.state.service = service

    @app.exception_handler(EthibenchError)
    async def _domain_error(request, exc: EthibenchError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.get("/api/targets")
    def targets():
        out = []
        for target_id in service.gt_store.targets():
            gts = service.gt_store.load(target_id)
            runs = service.registry.list_runs(target_id=target_id)
            out.append(
                {
                    "target_id": target_id,
                    "version": gts.version,
                    "entries": len(gts.entries),
                    "runs": len(runs),
                }
            )
        return out

    @app.get("/api/ground-truth")
    def ground_truth(target: str = Query(...)):
        if not service.gt_store.has_target(target):
            raise HTTPException(status_code=404, detail=f"unknown target {target!r}")
        gts = service.gt_store.load(target)
        return {
            "target_id": target,
            "version": gts.version,
            "entries": [e.to_obj() for e in gts.entries],
            "retired": [e.to_obj() for e in gts.retired],
        }

    @app.get("/api/queue")
    def queue(target: str = Query(...), status: str = Query("pending")):
        items = service.queue_items(target)
        if status != "all":
            items = [i for i in items if i["status"] == status]
        return items

    @app.post("/api/queue/{item_id}/decision")
    def decide(item_id: str, body: DecisionBody):
        target_id = None
        for candidate in service.gt_store.targets():
            items = {i["item_id"]: i for i in service.queue_items(candidate)}
            if item_id in items:
                target_id = candidate
                item = items[item_id]
                break
        if target_id is None:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        if item["status"] == "decided":
            raise HTTPException(status_code=409, detail=f"item {item_id!r} already decided")

        gts = service.gt_store.load(target_id)
        active = {e.id for e in gts.entries}
        provenance = f"triage {item_id}" + (f" by {body.reviewer}" if body.reviewer else "")

        if body.kind == "promote_new_gt":
            if not body.entry:
                raise HTTPException(status_code=422, detail="promote_new_gt requires an entry draft")
            try:
                draft = GroundTruthEntry.from_obj(body.entry, context="promote draft")
            except GroundTruthError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            rev = GroundTruthRevision(kind="add", entry=draft, provenance=provenance)
            try:
                service.gt_store.apply(target_id, rev)
            except GroundTruthError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        elif body.kind == "refine_gt":
            if not body.gt_id or body.gt_id not in active:
                raise HTTPException(status_code=422, detail="refine_gt requires an active gt_id")
            if not body.refined_fields:
                raise HTTPException(status_code=422, detail="refine_gt requires refined_fields")
            current = gts.entry(body.gt_id)
            allowed = {"name", "category", "description", "additional_info", "cvss", "cwe"}
            unknown = set(body.refined_fields) - allowed
            if unknown:
                raise HTTPException(status_code=422, detail=f"cannot refine fields {sorted(unknown)}")
            merged = current.to_obj() | body.refined_fields
            try:
                refined = GroundTruthEntry.from_obj(merged, context="refine draft")
                rev = GroundTruthRevision(
                    kind="refine", entry=refined, entry_id=body.gt_id, provenance=provenance
                )
                service.gt_store.apply(target_id, rev)
            except GroundTruthError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        elif body.kind == "map_to_existing":
            if not body.gt_id or body.gt_id not in active:
                raise HTTPException(status_code=422, detail="map_to_existing requires an active gt_id")
            service.record_label(
                target_id,
                {
                    "label": "tp",
                    "gt_id": body.gt_id,
                    "finding": item["finding"],
                    "source_item": item_id,
                    "reviewer": body.reviewer,
                    "timestamp": format_instant(now_utc()),
                },
            )
        else:  # confirm_fp
            service.record_label(
                target_id,
                {
                    "label": "fp",
                    "gt_id": None,
                    "finding": item["finding"],
                    "source_item": item_id,
                    "reviewer": body.reviewer,
                    "timestamp": format_instant(now_utc()),
                },
            )

        decision = {
            "item_id": item_id,
            "target_id": target_id,
            "run_id": item["run_id"],
            "finding_index": item["finding"]["index"],
            "kind": body.kind,
            "gt_id": body.gt_id,
            "entry": body.entry,
            "refined_fields": body.refined_fields,
            "reviewer": body.reviewer,
            "timestamp": format_instant(now_utc()),
        }
        with service._lock:
            already = service.decisions(target_id)
            if item_id in already:
                raise HTTPException(status_code=409, detail=f"item {item_id!r} already decided")
            service.record_decision(target_id, decision)
        return item | {"status": "decided", "decision": decision}

    @app.post("/api/reevaluate")
    def reevaluate(target: str = Query(...)):
        return service.start_reevaluation(target)

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job = service._jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job

    @app.get("/api/results")
    def results(target: str = Query(...), setup: str | None = Query(None)):
        return service.results(target, setup)

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
