"""Harness configuration: data directory, judge settings, severity bands.

Config files use INI key-value syntax (see README for the schema); every
value can also be set programmatically. Severity bands default to the
standard point table and must stay contiguous over [0.0, 10.0].
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .gt_store import DEFAULT_SEVERITY_BANDS, SeverityBand, validate_bands
from .judge import JudgeConfig

REPORT_FORMATS = ("json", "csv", "text")


@dataclass
class HarnessConfig:
    data_dir: Path = Path("data")
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    aggregation: str = "micro"
    severity_bands: tuple[SeverityBand, ...] = DEFAULT_SEVERITY_BANDS
    report_formats: tuple[str, ...] = ("json",)

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        if self.aggregation not in ("micro", "macro"):
            raise DataError(f"aggregation must be micro or macro, got {self.aggregation!r}")
        unknown = [f for f in self.report_formats if f not in REPORT_FORMATS]
        if unknown:
            raise DataError(f"unknown report formats {unknown}")
        self.severity_bands = tuple(validate_bands(self.severity_bands))
        if self.judge.cache_dir is None:
            self.judge = JudgeConfig(
                **{**self.judge.__dict__, "cache_dir": self.data_dir / "cache" / "judge"}
            )

    @property
    def ground_truth_dir(self) -> Path:
        return self.data_dir / "ground_truth"


def parse_bands(spec: str) -> tuple[SeverityBand, ...]:
    """Parse 'low:high:points' comma-separated band syntax."""
    bands = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise DataError(f"bad severity band {chunk!r} (want low:high:points)")
        bands.append(SeverityBand(float(parts[0]), float(parts[1]), int(parts[2])))
    return tuple(validate_bands(bands))


def load_config(path: str | Path | None = None, *, data_dir: str | None = None) -> HarnessConfig:
    """Load an INI config file; CLI-provided data_dir overrides the file."""
    parser = configparser.ConfigParser()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        parser.read(path, encoding="utf-8")

    harness = parser["harness"] if parser.has_section("harness") else {}
    judge_section = parser["judge"] if parser.has_section("judge") else {}
    severity = parser["severity"] if parser.has_section("severity") else {}

    def getbool(section, key, default):
        raw = section.get(key)
        if raw is None:
            return default
        return str(raw).strip().lower() in ("1", "true", "yes", "on")

    judge = JudgeConfig(
        backend=judge_section.get("backend", "lexical"),
        model_name=judge_section.get("model_name", ""),
        endpoint=judge_section.get("endpoint", ""),
        temperature=float(judge_section.get("temperature", 0.3)),
        max_in_flight=int(judge_section.get("max_in_flight", 4)),
        retries=int(judge_section.get("retries", 2)),
        cache_enabled=getbool(judge_section, "cache_enabled", True),
        lexical_min_overlap=int(judge_section.get("lexical_min_overlap", 5)),
        timeout_seconds=float(judge_section.get("timeout_seconds", 60.0)),
    )
    bands = (
        parse_bands(severity.get("bands"))
        if severity and severity.get("bands")
        else DEFAULT_SEVERITY_BANDS
    )
    formats = tuple(
        f.strip()
        for f in str(harness.get("report_formats", "json") or "json").split(",")
        if f.strip()
    )
    return HarnessConfig(
        data_dir=Path(data_dir or harness.get("data_dir", "data")),
        judge=judge,
        aggregation=harness.get("aggregation", "micro"),
        severity_bands=bands,
        report_formats=formats,
    )
