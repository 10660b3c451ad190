"""Budget-constrained selection of a reduced target suite.

The objective is the Pearson correlation between per-run scores restricted to
a candidate subset and per-run scores over the full target set; Spearman is
the secondary criterion. Subsets whose scores are constant across runs carry
no comparative information and are treated as infeasible.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DataError
from .metrics import canonical_metric, metric_from_counts
from .stats import ConstantInputError, pearson, spearman

EXHAUSTIVE_LIMIT = 20  # ~1M subsets; beyond this, greedy + local search


@dataclass(frozen=True)
class TargetCost:
    target_id: str
    cost: float


@dataclass(frozen=True)
class HistoryRow:
    """Per-target resolved counts for one (setup, replicate) run."""

    setup: str
    replicate: int
    counts: Mapping[str, tuple[int, int, int]]  # target_id -> (tp, fp, fn)


@dataclass(frozen=True)
class EvalHistory:
    targets: tuple[TargetCost, ...]
    rows: tuple[HistoryRow, ...]

    def __post_init__(self):
        ids = [t.target_id for t in self.targets]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate target ids in history")
        for t in self.targets:
            if t.cost <= 0:
                raise DataError(f"target {t.target_id!r} has non-positive cost {t.cost}")
        for row in self.rows:
            missing = [t for t in ids if t not in row.counts]
            if missing:
                raise DataError(
                    f"history row ({row.setup!r}, replicate {row.replicate}) "
                    f"lacks targets {missing}"
                )

    @property
    def target_ids(self) -> tuple[str, ...]:
        return tuple(t.target_id for t in self.targets)

    @property
    def total_cost(self) -> float:
        return sum(t.cost for t in self.targets)

    def cost_of(self, subset: Sequence[str]) -> float:
        lookup = {t.target_id: t.cost for t in self.targets}
        return sum(lookup[t] for t in subset)


def _pooled_score(
    row: HistoryRow, subset: Sequence[str], metric: str, aggregation: str
) -> float | None:
    if aggregation == "micro":
        tp = sum(row.counts[t][0] for t in subset)
        fp = sum(row.counts[t][1] for t in subset)
        fn = sum(row.counts[t][2] for t in subset)
        return metric_from_counts(tp, fp, fn, metric)
    if aggregation == "macro":
        values = [metric_from_counts(*row.counts[t], metric) for t in subset]
        defined = [v for v in values if v is not None]
        return sum(defined) / len(defined) if defined else None
    raise DataError(f"unknown aggregation {aggregation!r}")


@dataclass(frozen=True)
class RunScorePair:
    setup: str
    replicate: int
    full_score: float | None
    subset_score: float | None


def subset_scores(
    history: EvalHistory,
    subset: Sequence[str],
    *,
    metric: str = "f1",
    aggregation: str = "micro",
) -> list[RunScorePair]:
    """Per-run (full suite, subset) score pairs under one aggregation mode."""
    subset = sorted(set(subset))
    if not subset:
        raise DataError("subset must be non-empty")
    unknown = [t for t in subset if t not in history.target_ids]
    if unknown:
        raise DataError(f"subset references unknown targets {unknown}")
    metric = canonical_metric(metric)
    pairs = []
    for row in history.rows:
        pairs.append(
            RunScorePair(
                setup=row.setup,
                replicate=row.replicate,
                full_score=_pooled_score(row, history.target_ids, metric, aggregation),
                subset_score=_pooled_score(row, subset, metric, aggregation),
            )
        )
    return pairs


@dataclass(frozen=True)
class SuiteSelection:
    subset: tuple[str, ...]
    total_cost: float
    pearson: float
    spearman: float
    budget: float
    search: str  # "exhaustive" | "greedy"
    metric: str
    aggregation: str

    def to_obj(self) -> dict:
        return {
            "subset": list(self.subset),
            "total_cost": self.total_cost,
            "pearson": self.pearson,
            "spearman": self.spearman,
            "budget": self.budget,
            "search": self.search,
            "metric": self.metric,
            "aggregation": self.aggregation,
        }


class SuiteSelectionError(DataError):
    pass


def _correlations(
    history: EvalHistory, subset: tuple[str, ...], metric: str, aggregation: str
) -> tuple[float, float] | None:
    """(pearson, spearman) of subset vs full scores, or None if degenerate."""
    pairs = subset_scores(history, subset, metric=metric, aggregation=aggregation)
    xs = [p.subset_score for p in pairs]
    ys = [p.full_score for p in pairs]
    usable = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
    if len(usable) < 2:
        return None
    sub, full = zip(*usable)
    try:
        return pearson(sub, full), spearman(sub, full)
    except ConstantInputError:
        return None


_Candidate = tuple[tuple[str, ...], float, float, float]  # subset, pearson, spearman, cost

# Correlations are compared at 12-decimal granularity so that sub-ulp noise
# (e.g. two subsets that are both perfectly correlated in exact arithmetic)
# cannot flip the tie-break order between implementations.
_TIE_DECIMALS = 12


def _better(a: _Candidate, b: _Candidate | None) -> bool:
    """Primary: higher Pearson; ties: higher Spearman, lower cost, then
    lexicographically smaller sorted target ids."""
    if b is None:
        return True
    key_a = (-round(a[1], _TIE_DECIMALS), -round(a[2], _TIE_DECIMALS), a[3], a[0])
    key_b = (-round(b[1], _TIE_DECIMALS), -round(b[2], _TIE_DECIMALS), b[3], b[0])
    return key_a < key_b


def select_suite(
    history: EvalHistory,
    *,
    budget_abs: float | None = None,
    budget_fraction: float | None = None,
    metric: str = "f1",
    aggregation: str = "micro",
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
) -> SuiteSelection:
    """Pick the feasible subset maximizing Pearson agreement with full-suite
    scores; exhaustive for small suites, greedy + single-swap beyond."""
    if (budget_abs is None) == (budget_fraction is None):
        raise DataError("provide exactly one of budget_abs or budget_fraction")
    if len(history.rows) < 3:
        raise DataError("suite selection needs at least 3 history rows")
    metric = canonical_metric(metric)
    budget = float(budget_abs) if budget_abs is not None else float(
        budget_fraction * history.total_cost
    )
    ids = tuple(sorted(history.target_ids))
    costs = {t.target_id: t.cost for t in history.targets}
    cheapest = min(costs.values())
    if cheapest > budget:
        raise SuiteSelectionError(
            f"budget {budget:g} admits no target (cheapest target costs {cheapest:g})"
        )

    def evaluate(subset: tuple[str, ...]) -> _Candidate | None:
        cost = history.cost_of(subset)
        if cost > budget:
            return None
        corr = _correlations(history, subset, metric, aggregation)
        if corr is None:
            return None
        return (subset, corr[0], corr[1], cost)

    best: _Candidate | None = None
    if len(ids) <= exhaustive_limit:
        search = "exhaustive"
        for size in range(1, len(ids) + 1):
            for combo in itertools.combinations(ids, size):
                cand = evaluate(combo)
                if cand is not None and _better(cand, best):
                    best = cand
    else:
        search = "greedy"
        current: tuple[str, ...] = ()
        current_cand: _Candidate | None = None
        while True:
            step_best: _Candidate | None = None
            for t in ids:
                if t in current:
                    continue
                cand = evaluate(tuple(sorted((*current, t))))
                if cand is not None and _better(cand, step_best):
                    step_best = cand
            if step_best is None:
                break
            if current_cand is not None and not _better(step_best, current_cand):
                break
            current = step_best[0]
            current_cand = step_best
        # Single-swap local search to a local optimum.
        improved = True
        while current_cand is not None and improved:
            improved = False
            for out in current:
                for inc in ids:
                    if inc in current:
                        continue
                    swapped = tuple(sorted([t for t in current if t != out] + [inc]))
                    cand = evaluate(swapped)
                    if cand is not None and _better(cand, current_cand):
                        current, current_cand = cand[0], cand
                        improved = True
        best = current_cand

    if best is None:
        raise SuiteSelectionError(
            "no feasible subset: all candidates within budget have constant "
            "scores (degenerate) or correlations are undefined"
        )
    return SuiteSelection(
        subset=best[0],
        total_cost=best[3],
        pearson=best[1],
        spearman=best[2],
        budget=budget,
        search=search,
        metric=metric,
        aggregation=aggregation,
    )


# ---------------------------------------------------------------------------
# History CSV
# ---------------------------------------------------------------------------

HISTORY_COLUMNS = ("setup", "replicate", "target_id", "tp", "fp", "fn", "score", "cost")


def load_history_csv(path: str | Path) -> EvalHistory:
    """Read a history CSV (one row per setup/replicate/target).

    Target cost is taken as the mean of the cost column per target; the score
    column is informational (scores are recomputed from counts).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"history file not found: {path}")
    per_target_costs: dict[str, list[float]] = {}
    rows: dict[tuple[str, int], dict[str, tuple[int, int, int]]] = {}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("setup", "replicate", "target_id", "tp", "fp", "fn", "cost")
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing history columns {missing}")
        for i, rec in enumerate(reader, start=2):
            try:
                key = (rec["setup"], int(rec["replicate"]))
                target = rec["target_id"]
                counts = (int(rec["tp"]), int(rec["fp"]), int(rec["fn"]))
                cost = float(rec["cost"])
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}:{i}: bad history row ({exc})") from exc
            rows.setdefault(key, {})[target] = counts
            per_target_costs.setdefault(target, []).append(cost)
    targets = tuple(
        TargetCost(t, sum(cs) / len(cs)) for t, cs in sorted(per_target_costs.items())
    )
    history_rows = tuple(
        HistoryRow(setup=k[0], replicate=k[1], counts=v) for k, v in sorted(rows.items())
    )
    return EvalHistory(targets=targets, rows=history_rows)


def dump_history_csv(history: EvalHistory, path: str | Path) -> None:
    path = Path(path)
    costs = {t.target_id: t.cost for t in history.targets}
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in history.rows:
            for target in history.target_ids:
                tp, fp, fn = row.counts[target]
                score = metric_from_counts(tp, fp, fn, "f1")
                writer.writerow([
                    row.setup, row.replicate, target, tp, fp, fn,
                    "" if score is None else f"{score:.6f}", costs[target],
                ])
