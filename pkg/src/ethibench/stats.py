"""Pairwise A/B statistics: Welch's t-test, Cohen's d, and correlation kernels.

The two-sided p-value is evaluated through the regularized incomplete beta
form of the Student-t CDF, so no statistics tables or distribution objects
are involved in the production path (the test suite checks these kernels
against an independent reference implementation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc

from .errors import DataError
from .metrics import canonical_metric, metric_from_counts


class DegenerateSamplesError(DataError):
    """Both samples have zero variance where variance is required."""


class ConstantInputError(DataError):
    """Correlation is undefined for a constant input vector."""


def _as_array(sample: Sequence[float], name: str, min_n: int = 2) -> np.ndarray:
    arr = np.asarray(list(sample), dtype=float)
    if arr.ndim != 1 or arr.size < min_n:
        raise DataError(f"sample {name!r} needs at least {min_n} values, got {arr.size}")
    return arr


def student_t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t via the regularized
    incomplete beta function: P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)."""
    if df <= 0:
        raise DataError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_two_sided: float
    degenerate: bool = False


def welch_t(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Welch's unequal-variance t-test with Welch–Satterthwaite df."""
    xa = _as_array(a, "a")
    xb = _as_array(b, "b")
    na, nb = xa.size, xb.size
    ma, mb = float(xa.mean()), float(xb.mean())
    va, vb = float(xa.var(ddof=1)), float(xb.var(ddof=1))

    if va == 0.0 and vb == 0.0:
        # Zero observed variability: identical means are indistinguishable
        # (p=1 by convention); different means are the p -> 0 limit.
        if ma == mb:
            return WelchResult(t=0.0, df=float(na + nb - 2), p_two_sided=1.0, degenerate=True)
        t = math.inf if ma > mb else -math.inf
        return WelchResult(t=t, df=float(na + nb - 2), p_two_sided=0.0, degenerate=True)

    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (
        (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
    )
    return WelchResult(t=t, df=df, p_two_sided=student_t_sf_two_sided(t, df))


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """Pooled-standard-deviation effect size."""
    xa = _as_array(a, "a")
    xb = _as_array(b, "b")
    na, nb = xa.size, xb.size
    va, vb = float(xa.var(ddof=1)), float(xb.var(ddof=1))
    pooled_var = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
    diff = float(xa.mean()) - float(xb.mean())
    if pooled_var == 0.0:
        if diff == 0.0:
            return 0.0
        raise DegenerateSamplesError(
            "zero pooled variance with unequal means: effect size is unbounded"
        )
    return diff / math.sqrt(pooled_var)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation; raises for constant input."""
    xs = _as_array(x, "x")
    ys = _as_array(y, "y")
    if xs.size != ys.size:
        raise DataError(f"length mismatch: {xs.size} vs {ys.size}")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInputError("pearson undefined for constant input")
    r = float(dx @ dy) / (sx * sy)
    return max(-1.0, min(1.0, r))


def fractional_ranks(x: Sequence[float]) -> np.ndarray:
    """Ranks starting at 1, ties receiving the average rank."""
    xs = np.asarray(list(x), dtype=float)
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(xs.size, dtype=float)
    i = 0
    while i < xs.size:
        j = i
        while j + 1 < xs.size and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation: Pearson on fractional ranks."""
    xs = _as_array(x, "x")
    ys = _as_array(y, "y")
    if xs.size != ys.size:
        raise DataError(f"length mismatch: {xs.size} vs {ys.size}")
    return pearson(fractional_ranks(xs), fractional_ranks(ys))


# ---------------------------------------------------------------------------
# Setup-versus-setup comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunCounts:
    """Per-run, per-target resolved counts, as read from evaluation reports."""

    setup: str
    target_id: str
    replicate: int
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MetricComparison:
    metric: str
    difference_points: float
    p_value: float
    cohens_d: float
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float
    degenerate: bool = False
    variance_flagged: bool = False

    def to_obj(self) -> dict:
        return {
            "metric": self.metric,
            "difference_points": self.difference_points,
            "p_value": self.p_value,
            "cohens_d": self.cohens_d,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "degenerate": self.degenerate,
            "variance_flagged": self.variance_flagged,
        }


@dataclass(frozen=True)
class PairwiseComparison:
    setup_a: str
    setup_b: str
    aggregation: str
    rows: tuple[MetricComparison, ...]

    def to_obj(self) -> dict:
        return {
            "setup_a": self.setup_a,
            "setup_b": self.setup_b,
            "aggregation": self.aggregation,
            "unit": "percentage points (difference); scores in [0,1]",
            "rows": [r.to_obj() for r in self.rows],
        }


def per_run_scores(
    rows: Sequence[RunCounts], setup: str, metric: str, aggregation: str
) -> list[float]:
    """One score per replicate, aggregated across targets.

    micro pools tp/fp/fn across targets before computing the metric; macro
    averages per-target metric values (undefined targets excluded).
    """
    metric = canonical_metric(metric)
    mine = [r for r in rows if r.setup == setup]
    if not mine:
        raise DataError(f"no scored runs for setup {setup!r}")
    replicates = sorted({r.replicate for r in mine})
    targets = sorted({r.target_id for r in mine})
    scores: list[float] = []
    for rep in replicates:
        batch = {r.target_id: r for r in mine if r.replicate == rep}
        missing = [t for t in targets if t not in batch]
        if missing:
            raise DataError(
                f"setup {setup!r} replicate {rep} lacks targets {missing}"
            )
        if aggregation == "micro":
            tp = sum(r.tp for r in batch.values())
            fp = sum(r.fp for r in batch.values())
            fn = sum(r.fn for r in batch.values())
            value = metric_from_counts(tp, fp, fn, metric)
        elif aggregation == "macro":
            per_target = [
                metric_from_counts(r.tp, r.fp, r.fn, metric) for r in batch.values()
            ]
            defined = [v for v in per_target if v is not None]
            value = sum(defined) / len(defined) if defined else None
        else:
            raise DataError(f"unknown aggregation {aggregation!r}")
        if value is not None:
            scores.append(value)
    return scores


def compare_setups(
    rows: Sequence[RunCounts],
    setup_a: str,
    setup_b: str,
    metrics: Sequence[str] = ("f1", "f0.5", "recall", "precision"),
    aggregation: str = "micro",
) -> PairwiseComparison:
    """Welch's t-test plus Cohen's d per metric over per-run score samples."""
    targets_a = {r.target_id for r in rows if r.setup == setup_a}
    targets_b = {r.target_id for r in rows if r.setup == setup_b}
    if not targets_a:
        raise DataError(f"no scored runs for setup {setup_a!r}")
    if not targets_b:
        raise DataError(f"no scored runs for setup {setup_b!r}")
    if targets_a != targets_b:
        missing_a = sorted(targets_b - targets_a)
        missing_b = sorted(targets_a - targets_b)
        raise DataError(
            "mismatched target coverage: "
            f"{setup_a!r} lacks {missing_a}, {setup_b!r} lacks {missing_b}"
        )

    comparisons: list[MetricComparison] = []
    for name in metrics:
        metric = canonical_metric(name)
        sample_a = per_run_scores(rows, setup_a, metric, aggregation)
        sample_b = per_run_scores(rows, setup_b, metric, aggregation)
        if len(sample_a) < 2 or len(sample_b) < 2:
            raise DataError(
                f"metric {metric!r}: need >= 2 scored runs per setup "
                f"(got {len(sample_a)} and {len(sample_b)}); statistical "
                "comparison is underpowered below two replicates"
            )
        welch = welch_t(sample_a, sample_b)
        try:
            d = cohens_d(sample_a, sample_b)
        except DegenerateSamplesError:
            d = math.inf if welch.t > 0 else -math.inf
        va = float(np.var(sample_a, ddof=1))
        vb = float(np.var(sample_b, ddof=1))
        flagged = bool(min(va, vb) > 0 and max(va, vb) / min(va, vb) > 4.0)
        mean_a = float(np.mean(sample_a))
        mean_b = float(np.mean(sample_b))
        comparisons.append(
            MetricComparison(
                metric=metric,
                difference_points=100.0 * (mean_a - mean_b),
                p_value=welch.p_two_sided,
                cohens_d=d,
                n_a=len(sample_a),
                n_b=len(sample_b),
                mean_a=mean_a,
                mean_b=mean_b,
                degenerate=welch.degenerate,
                variance_flagged=flagged,
            )
        )
    return PairwiseComparison(
        setup_a=setup_a,
        setup_b=setup_b,
        aggregation=aggregation,
        rows=tuple(comparisons),
    )


def format_comparison_table(pc: PairwiseComparison) -> str:
    """Aligned text table: one column per metric, Difference / p-value /
    Cohen's d rows. Differences are in percentage points."""
    headers = [row.metric for row in pc.rows]
    col_w = max(12, *(len(h) + 2 for h in headers)) if headers else 12
    label_w = 14

    def fmt_row(label: str, values: list[str]) -> str:
        return label.ljust(label_w) + "".join(v.rjust(col_w) for v in values)

    lines = [
        f"{pc.setup_a} vs {pc.setup_b}  (aggregation: {pc.aggregation}; "
        "difference in percentage points)",
        fmt_row("", headers),
        fmt_row(
            "Difference",
            [f"{row.difference_points:+.2f}%" for row in pc.rows],
        ),
        fmt_row("p-value", [f"{row.p_value:.4f}" for row in pc.rows]),
        fmt_row("Cohen's d", [f"{row.cohens_d:.3f}" for row in pc.rows]),
        fmt_row("n", [f"{row.n_a}/{row.n_b}" for row in pc.rows]),
    ]
    flagged = [row.metric for row in pc.rows if row.variance_flagged]
    if flagged:
        lines.append(f"note: variance ratio > 4 for {', '.join(flagged)}")
    return "\n".join(lines)
