"""Ground-truth sets: validated entries, severity point bands, and an
append-only revision history with replayable versions.

File layout managed by :class:`GroundTruthStore` (all JSON-lines):

    <target>.jsonl             current active entries, one per line
    <target>.meta.json         {"target_id": ..., "version": ...}
    <target>.revisions.jsonl   append-only revision log
    <target>.v1.jsonl          frozen baseline used to replay old versions
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable

from .errors import GroundTruthError
from .timefmt import format_instant, now_utc, parse_instant

_CWE_RE = re.compile(r"^CWE-\d+$")

ENTRY_KEYS = ("id", "name", "category", "description", "additional_info", "cvss", "cwe")


def _check_one_decimal(cvss: float) -> None:
    if abs(cvss * 10 - round(cvss * 10)) > 1e-9:
        raise GroundTruthError(f"cvss {cvss!r} must have at most one fractional digit")


@dataclass(frozen=True)
class GroundTruthEntry:
    """One known vulnerability in a target."""

    id: str
    name: str
    category: str
    description: str
    additional_info: str = ""
    cvss: float = 0.0
    cwe: str | None = None

    def __post_init__(self):
        if not self.id:
            raise GroundTruthError("entry id must be non-empty")
        if not self.name:
            raise GroundTruthError(f"entry {self.id!r}: name must be non-empty")
        if not self.description:
            raise GroundTruthError(f"entry {self.id!r}: description must be non-empty")
        if not (0.0 <= self.cvss <= 10.0):
            raise GroundTruthError(
                f"entry {self.id!r}: cvss {self.cvss} outside [0.0, 10.0]"
            )
        _check_one_decimal(self.cvss)
        if self.cwe is not None and not _CWE_RE.match(self.cwe):
            raise GroundTruthError(
                f"entry {self.id!r}: cwe {self.cwe!r} does not match 'CWE-<digits>'"
            )

    def to_obj(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "category": self.category,
            "description": self.description,
            "additional_info": self.additional_info,
            "cvss": self.cvss,
            "cwe": self.cwe,
        }

    @classmethod
    def from_obj(cls, obj: dict, *, context: str = "") -> "GroundTruthEntry":
        if not isinstance(obj, dict):
            raise GroundTruthError(f"{context}: entry must be a JSON object")
        unknown = set(obj) - set(ENTRY_KEYS)
        if unknown:
            raise GroundTruthError(f"{context}: unknown keys {sorted(unknown)}")
        try:
            return cls(
                id=str(obj.get("id", "")),
                name=str(obj.get("name", "")),
                category=str(obj.get("category", "")),
                description=str(obj.get("description", "")),
                additional_info=str(obj.get("additional_info", "") or ""),
                cvss=float(obj.get("cvss", 0.0)),
                cwe=obj.get("cwe"),
            )
        except (TypeError, ValueError) as exc:
            raise GroundTruthError(f"{context}: {exc}") from exc


@dataclass(frozen=True)
class GroundTruthSet:
    """The active entries of one target at a specific version.

    ``entries`` holds active entries in file order; ``retired`` keeps entries
    removed by 'retire' revisions so they stay out of FN denominators but the
    ids remain reserved.
    """

    target_id: str
    version: int
    entries: tuple[GroundTruthEntry, ...]
    retired: tuple[GroundTruthEntry, ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for entry in (*self.entries, *self.retired):
            if entry.id in seen:
                raise GroundTruthError(
                    f"duplicate entry id {entry.id!r} in target {self.target_id!r}"
                )
            seen.add(entry.id)

    @property
    def active_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.entries)

    def entry(self, gt_id: str) -> GroundTruthEntry:
        for e in self.entries:
            if e.id == gt_id:
                return e
        raise GroundTruthError(f"unknown entry id {gt_id!r} in target {self.target_id!r}")

    def position(self, gt_id: str) -> int:
        """File-order position of an active entry (used for tie-breaking)."""
        for i, e in enumerate(self.entries):
            if e.id == gt_id:
                return i
        raise GroundTruthError(f"unknown entry id {gt_id!r} in target {self.target_id!r}")


# ---------------------------------------------------------------------------
# Severity point bands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeverityBand:
    low: float
    high: float
    points: int


DEFAULT_SEVERITY_BANDS: tuple[SeverityBand, ...] = (
    SeverityBand(0.0, 0.0, 0),
    SeverityBand(0.1, 3.9, 3),
    SeverityBand(4.0, 6.9, 15),
    SeverityBand(7.0, 8.9, 30),
    SeverityBand(9.0, 10.0, 50),
)


def validate_bands(bands: Iterable[SeverityBand]) -> tuple[SeverityBand, ...]:
    """Check bands are contiguous at 0.1 granularity and cover [0.0, 10.0]."""
    bands = tuple(bands)
    if not bands:
        raise GroundTruthError("severity bands must be non-empty")
    ordered = sorted(bands, key=lambda b: b.low)
    prev_high = None
    for band in ordered:
        if band.low > band.high:
            raise GroundTruthError(f"severity band {band} has low > high")
        if prev_high is None:
            if round(band.low * 10) != 0:
                raise GroundTruthError("severity bands must start at 0.0")
        elif round(band.low * 10) != round(prev_high * 10) + 1:
            raise GroundTruthError(
                f"severity bands not contiguous at {prev_high} -> {band.low}"
            )
        prev_high = band.high
    if round(prev_high * 10) != 100:
        raise GroundTruthError("severity bands must end at 10.0")
    return ordered


def severity_points(
    cvss: float, bands: Iterable[SeverityBand] = DEFAULT_SEVERITY_BANDS
) -> int:
    """Map a CVSS score to its point value; boundaries are inclusive."""
    if not (0.0 <= cvss <= 10.0):
        raise GroundTruthError(f"cvss {cvss!r} outside [0.0, 10.0]")
    _check_one_decimal(cvss)
    tenth = round(cvss * 10)
    for band in bands:
        if round(band.low * 10) <= tenth <= round(band.high * 10):
            return band.points
    raise GroundTruthError(f"cvss {cvss!r} not covered by severity bands")


# ---------------------------------------------------------------------------
# Revisions
# ---------------------------------------------------------------------------

REVISION_KINDS = ("add", "refine", "retire")


@dataclass(frozen=True)
class GroundTruthRevision:
    kind: str
    entry: GroundTruthEntry | None = None
    entry_id: str | None = None
    provenance: str = ""
    timestamp: datetime = field(default_factory=now_utc)

    def __post_init__(self):
        if self.kind not in REVISION_KINDS:
            raise GroundTruthError(f"unknown revision kind {self.kind!r}")
        if self.kind == "add" and self.entry is None:
            raise GroundTruthError("add revision requires an entry")
        if self.kind == "refine" and (self.entry is None or self.entry_id is None):
            raise GroundTruthError("refine revision requires entry and entry_id")
        if self.kind == "retire" and self.entry_id is None:
            raise GroundTruthError("retire revision requires entry_id")
        if self.kind == "refine" and self.entry.id != self.entry_id:
            raise GroundTruthError(
                f"refine cannot change id {self.entry_id!r} -> {self.entry.id!r}"
            )

    def to_obj(self) -> dict:
        return {
            "kind": self.kind,
            "entry": self.entry.to_obj() if self.entry else None,
            "entry_id": self.entry_id,
            "provenance": self.provenance,
            "timestamp": format_instant(self.timestamp),
        }

    @classmethod
    def from_obj(cls, obj: dict, *, context: str = "") -> "GroundTruthRevision":
        entry = obj.get("entry")
        return cls(
            kind=obj.get("kind", ""),
            entry=GroundTruthEntry.from_obj(entry, context=context) if entry else None,
            entry_id=obj.get("entry_id"),
            provenance=obj.get("provenance", ""),
            timestamp=parse_instant(obj["timestamp"]) if obj.get("timestamp") else now_utc(),
        )


def apply_revision(gt_set: GroundTruthSet, rev: GroundTruthRevision) -> GroundTruthSet:
    """Apply one revision, returning a new set with version + 1."""
    active = {e.id for e in gt_set.entries}
    retired = {e.id for e in gt_set.retired}

    if rev.kind == "add":
        if rev.entry.id in active or rev.entry.id in retired:
            raise GroundTruthError(
                f"add: id {rev.entry.id!r} already used in target {gt_set.target_id!r}"
            )
        return replace(
            gt_set, version=gt_set.version + 1, entries=(*gt_set.entries, rev.entry)
        )

    if rev.kind == "refine":
        if rev.entry_id not in active:
            if rev.entry_id in retired:
                raise GroundTruthError(f"refine: entry {rev.entry_id!r} is retired")
            raise GroundTruthError(f"refine: unknown entry id {rev.entry_id!r}")
        entries = tuple(
            rev.entry if e.id == rev.entry_id else e for e in gt_set.entries
        )
        return replace(gt_set, version=gt_set.version + 1, entries=entries)

    # retire
    if rev.entry_id not in active:
        if rev.entry_id in retired:
            raise GroundTruthError(f"retire: entry {rev.entry_id!r} already retired")
        raise GroundTruthError(f"retire: unknown entry id {rev.entry_id!r}")
    victim = gt_set.entry(rev.entry_id)
    entries = tuple(e for e in gt_set.entries if e.id != rev.entry_id)
    return replace(
        gt_set,
        version=gt_set.version + 1,
        entries=entries,
        retired=(*gt_set.retired, victim),
    )


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _entry_line(entry: GroundTruthEntry) -> str:
    return json.dumps(entry.to_obj(), ensure_ascii=False)


def load_ground_truth(path: str | Path) -> GroundTruthSet:
    """Load a ground-truth JSONL file plus its optional sidecar metadata."""
    path = Path(path)
    if not path.exists():
        raise GroundTruthError(f"ground-truth file not found: {path}")

    entries: list[GroundTruthEntry] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GroundTruthError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            entry = GroundTruthEntry.from_obj(obj, context=f"{path}:{lineno}")
            if entry.id in seen:
                raise GroundTruthError(f"{path}:{lineno}: duplicate entry id {entry.id!r}")
            seen.add(entry.id)
            entries.append(entry)

    target_id = path.stem
    version = 1
    meta_path = path.with_name(path.stem + ".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        target_id = meta.get("target_id", target_id)
        version = int(meta.get("version", 1))
    return GroundTruthSet(target_id=target_id, version=version, entries=tuple(entries))


def save_ground_truth(gt_set: GroundTruthSet, path: str | Path) -> None:
    """Write active entries as JSONL plus the sidecar metadata file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = "".join(_entry_line(e) + "\n" for e in gt_set.entries)
    _atomic_write(path, body)
    meta_path = path.with_name(path.stem + ".meta.json")
    _atomic_write(
        meta_path,
        json.dumps({"target_id": gt_set.target_id, "version": gt_set.version}) + "\n",
    )


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


class GroundTruthStore:
    """Single-writer store for per-target ground truth under one directory.

    Revision application is serialized; readers always see a complete
    snapshot because files are replaced atomically.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    # -- paths ------------------------------------------------------------
    def _current_path(self, target_id: str) -> Path:
        return self.root / f"{target_id}.jsonl"

    def _baseline_path(self, target_id: str) -> Path:
        return self.root / f"{target_id}.v1.jsonl"

    def _revlog_path(self, target_id: str) -> Path:
        return self.root / f"{target_id}.revisions.jsonl"

    # -- operations --------------------------------------------------------
    def targets(self) -> list[str]:
        return sorted(
            p.stem for p in self.root.glob("*.jsonl")
            if not p.name.endswith((".revisions.jsonl", ".v1.jsonl"))
        )

    def has_target(self, target_id: str) -> bool:
        return self._current_path(target_id).is_file()

    def init_target(self, source_path: str | Path, target_id: str | None = None) -> GroundTruthSet:
        """Import a ground-truth file as version 1 of a new target."""
        gt = load_ground_truth(source_path)
        if target_id:
            gt = replace(gt, target_id=target_id)
        gt = replace(gt, version=1)
        with self._lock:
            if self.has_target(gt.target_id):
                raise GroundTruthError(f"target {gt.target_id!r} already initialized")
            save_ground_truth(gt, self._current_path(gt.target_id))
            body = "".join(_entry_line(e) + "\n" for e in gt.entries)
            _atomic_write(self._baseline_path(gt.target_id), body)
        return gt

    def load(self, target_id: str) -> GroundTruthSet:
        path = self._current_path(target_id)
        if not path.exists():
            raise GroundTruthError(f"no ground truth for target {target_id!r} (expected {path})")
        gt = load_ground_truth(path)
        # The current file holds active entries only; when the history
        # contains retirements, replay it so the retired ids stay reserved.
        if any(rev.kind == "retire" for rev in self.revisions(target_id)):
            return self.get_version(target_id, gt.version)
        return gt

    def version(self, target_id: str) -> int:
        return self.load(target_id).version

    def revisions(self, target_id: str) -> list[GroundTruthRevision]:
        path = self._revlog_path(target_id)
        if not path.exists():
            return []
        revs = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if line:
                    revs.append(
                        GroundTruthRevision.from_obj(json.loads(line), context=f"{path}:{lineno}")
                    )
        return revs

    def apply(self, target_id: str, rev: GroundTruthRevision) -> GroundTruthSet:
        """Apply a revision to the current version and persist it."""
        with self._lock:
            current = self.load(target_id)
            updated = apply_revision(current, rev)
            with self._revlog_path(target_id).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rev.to_obj(), ensure_ascii=False) + "\n")
            save_ground_truth(updated, self._current_path(target_id))
        return updated

    def get_version(self, target_id: str, version: int) -> GroundTruthSet:
        """Replay the revision log from the frozen baseline up to ``version``."""
        baseline_path = self._baseline_path(target_id)
        if not baseline_path.exists():
            raise GroundTruthError(f"no baseline snapshot for target {target_id!r}")
        entries: list[GroundTruthEntry] = []
        with baseline_path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if line:
                    entries.append(
                        GroundTruthEntry.from_obj(
                            json.loads(line), context=f"{baseline_path}:{lineno}"
                        )
                    )
        gt = GroundTruthSet(target_id=target_id, version=1, entries=tuple(entries))
        revs = self.revisions(target_id)
        if version < 1 or version > len(revs) + 1:
            raise GroundTruthError(
                f"target {target_id!r} has versions 1..{len(revs) + 1}, not {version}"
            )
        for rev in revs[: version - 1]:
            gt = apply_revision(gt, rev)
        return gt
