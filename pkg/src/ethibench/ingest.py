"""Agent finding files and the on-disk run registry.

Registry layout: ``runs/<run_id>/meta.json`` + ``runs/<run_id>/findings.jsonl``.
Runs are immutable once registered; (setup, target_id, replicate) is unique.
"""

from __future__ import annotations

import json
import re
import shutil
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .errors import FindingsError, RegistryError
from .timefmt import format_instant, parse_instant

FINDING_KEYS = ("title", "description", "steps_to_reproduce", "timestamp")

_RUN_ID_SAFE = re.compile(r"[^A-Za-z0-9._-]+")


@dataclass(frozen=True)
class Finding:
    """One agent-reported vulnerability, positioned by file line order."""

    index: int
    title: str
    description: str = ""
    steps_to_reproduce: str = ""
    timestamp: datetime | None = None

    def __post_init__(self):
        if not self.title:
            raise FindingsError(f"finding {self.index}: title must be non-empty")
        if self.index < 0:
            raise FindingsError(f"finding index {self.index} must be >= 0")

    def to_obj(self) -> dict:
        return {
            "title": self.title,
            "description": self.description,
            "steps_to_reproduce": self.steps_to_reproduce,
            "timestamp": format_instant(self.timestamp) if self.timestamp else None,
        }

    @property
    def text(self) -> str:
        return "\n".join((self.title, self.description, self.steps_to_reproduce))


def load_findings(path: str | Path) -> list[Finding]:
    """Parse a findings JSONL file, preserving line order as the index."""
    path = Path(path)
    if not path.exists():
        raise FindingsError(f"findings file not found: {path}")
    findings: list[Finding] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FindingsError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise FindingsError(f"{path}:{lineno}: finding must be a JSON object")
            title = str(obj.get("title", "") or "")
            if not title:
                raise FindingsError(f"{path}:{lineno}: empty title")
            ts_raw = obj.get("timestamp")
            try:
                ts = parse_instant(ts_raw) if ts_raw else None
            except ValueError as exc:
                raise FindingsError(f"{path}:{lineno}: bad timestamp {ts_raw!r}") from exc
            findings.append(
                Finding(
                    index=len(findings),
                    title=title,
                    description=str(obj.get("description", "") or ""),
                    steps_to_reproduce=str(obj.get("steps_to_reproduce", "") or ""),
                    timestamp=ts,
                )
            )
    return findings


@dataclass(frozen=True)
class RunRecord:
    """One agent execution on one target."""

    run_id: str
    setup: str
    target_id: str
    replicate: int
    findings: tuple[Finding, ...] = ()
    started_at: datetime | None = None
    ended_at: datetime | None = None
    duration: float = 0.0
    cost: float = 0.0
    currency: str = "USD"
    notes: str = ""

    def __post_init__(self):
        if self.replicate < 1:
            raise RegistryError(f"run {self.run_id!r}: replicate must be >= 1")
        if self.duration < 0:
            raise RegistryError(f"run {self.run_id!r}: duration must be >= 0")
        if self.cost < 0:
            raise RegistryError(f"run {self.run_id!r}: cost must be >= 0")
        if self.started_at and self.ended_at:
            span = (self.ended_at - self.started_at).total_seconds()
            if span < 0:
                raise RegistryError(f"run {self.run_id!r}: ended_at precedes started_at")
            if abs(span - self.duration) > 1.0:
                raise RegistryError(
                    f"run {self.run_id!r}: stored duration {self.duration}s disagrees "
                    f"with timestamps ({span:.1f}s) by more than 1s"
                )

    def meta_obj(self) -> dict:
        return {
            "run_id": self.run_id,
            "setup": self.setup,
            "target_id": self.target_id,
            "replicate": self.replicate,
            "started_at": format_instant(self.started_at) if self.started_at else None,
            "ended_at": format_instant(self.ended_at) if self.ended_at else None,
            "duration_seconds": self.duration,
            "cost": self.cost,
            "currency": self.currency,
            "notes": self.notes,
        }


def default_run_id(setup: str, target_id: str, replicate: int) -> str:
    raw = f"{setup}.{target_id}.r{replicate}"
    return _RUN_ID_SAFE.sub("-", raw)


class RunRegistry:
    """Append-only registry of runs under ``<root>/runs/``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.runs_dir = self.root / "runs"
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def register_run(
        self,
        *,
        setup: str,
        target_id: str,
        replicate: int,
        findings_path: str | Path,
        run_id: str | None = None,
        started_at: datetime | None = None,
        ended_at: datetime | None = None,
        duration: float | None = None,
        cost: float = 0.0,
        currency: str = "USD",
        notes: str = "",
    ) -> RunRecord:
        findings = load_findings(findings_path)
        if duration is None:
            if started_at and ended_at:
                duration = max(0.0, (ended_at - started_at).total_seconds())
            else:
                duration = 0.0
        run_id = run_id or default_run_id(setup, target_id, replicate)
        record = RunRecord(
            run_id=run_id,
            setup=setup,
            target_id=target_id,
            replicate=replicate,
            findings=tuple(findings),
            started_at=started_at,
            ended_at=ended_at,
            duration=float(duration),
            cost=float(cost),
            currency=currency,
            notes=notes,
        )
        with self._lock:
            if (self.runs_dir / run_id).exists():
                raise RegistryError(f"run id {run_id!r} already registered")
            for other in self.list_runs():
                if (other.setup, other.target_id, other.replicate) == (
                    setup,
                    target_id,
                    replicate,
                ):
                    raise RegistryError(
                        f"(setup={setup!r}, target={target_id!r}, replicate={replicate}) "
                        f"already registered as run {other.run_id!r}"
                    )
            run_dir = self.runs_dir / run_id
            run_dir.mkdir(parents=True)
            shutil.copyfile(findings_path, run_dir / "findings.jsonl")
            (run_dir / "meta.json").write_text(
                json.dumps(record.meta_obj(), indent=2) + "\n", encoding="utf-8"
            )
        return record

    def get_run(self, run_id: str) -> RunRecord:
        run_dir = self.runs_dir / run_id
        meta_path = run_dir / "meta.json"
        if not meta_path.exists():
            raise RegistryError(f"unknown run id {run_id!r}")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        findings = load_findings(run_dir / "findings.jsonl")
        return RunRecord(
            run_id=meta["run_id"],
            setup=meta["setup"],
            target_id=meta["target_id"],
            replicate=int(meta["replicate"]),
            findings=tuple(findings),
            started_at=parse_instant(meta["started_at"]) if meta.get("started_at") else None,
            ended_at=parse_instant(meta["ended_at"]) if meta.get("ended_at") else None,
            duration=float(meta.get("duration_seconds", 0.0)),
            cost=float(meta.get("cost", 0.0)),
            currency=meta.get("currency", "USD"),
            notes=meta.get("notes", ""),
        )

    def list_runs(
        self, *, setup: str | None = None, target_id: str | None = None
    ) -> list[RunRecord]:
        records = []
        for meta_path in self.runs_dir.glob("*/meta.json"):
            record = self.get_run(meta_path.parent.name)
            if setup is not None and record.setup != setup:
                continue
            if target_id is not None and record.target_id != target_id:
                continue
            records.append(record)
        records.sort(key=lambda r: (r.setup, r.target_id, r.replicate))
        return records
