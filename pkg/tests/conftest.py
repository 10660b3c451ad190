"""Shared fixtures: synthetic ground-truth worlds built for the lexical judge.

Entry texts draw from per-entry vocabularies so two different entries never
share five content tokens; noise findings use a disjoint alphabet so they
match nothing. A finding matches entry ``gt-i`` exactly when its text contains
the literal id token.
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ethibench.gt_store import GroundTruthEntry, GroundTruthSet
from ethibench.ingest import Finding

T0 = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


def make_entry(i: int, *, cvss: float = 5.0, cwe: str | None = None):
    return GroundTruthEntry(
        id=f"gt-{i:02d}",
        name=f"Weakness number {i} in component c{i}",
        category=f"cat{i % 4}",
        description=f"behavior anomaly q{i}a q{i}b q{i}c observed under c{i} module",
        additional_info=f"internal note q{i}d",
        cvss=cvss,
        cwe=cwe,
    )


def make_gts(n: int, *, target: str = "synth", version: int = 1,
             cvss=None, cwes=None) -> GroundTruthSet:
    entries = []
    for i in range(n):
        entries.append(
            make_entry(
                i,
                cvss=(cvss[i] if cvss else 5.0),
                cwe=(cwes[i] if cwes else None),
            )
        )
    return GroundTruthSet(target_id=target, version=version, entries=tuple(entries))


def naming_finding(index: int, gt_ids, *, minute: int | None = None) -> Finding:
    """A finding whose title names one or more entry ids (lexical match)."""
    if isinstance(gt_ids, str):
        gt_ids = [gt_ids]
    ts = T0 + timedelta(minutes=minute) if minute is not None else None
    return Finding(
        index=index,
        title=f"issue referencing {' and '.join(gt_ids)}",
        description="report body",
        steps_to_reproduce="curl target",
        timestamp=ts,
    )


def noise_finding(index: int, *, minute: int | None = None) -> Finding:
    """A finding sharing no content tokens with any synthetic entry."""
    ts = T0 + timedelta(minutes=minute) if minute is not None else None
    return Finding(
        index=index,
        title=f"zz{index} vapor trail xyzzy{index}",
        description=f"plugh{index} fog bank",
        steps_to_reproduce="",
        timestamp=ts,
    )


def write_findings_file(path: Path, findings) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for f in findings:
            fh.write(json.dumps(f.to_obj()) + "\n")
    return path


def write_gt_file(path: Path, gts: GroundTruthSet) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for e in gts.entries:
            fh.write(json.dumps(e.to_obj()) + "\n")
    return path


@pytest.fixture
def gts5() -> GroundTruthSet:
    return make_gts(5)


@pytest.fixture
def data_dir(tmp_path) -> Path:
    d = tmp_path / "data"
    d.mkdir()
    return d
