"""Independent reference implementations used to verify the harness kernels.

These deliberately avoid the production code paths: exact rational arithmetic
for ratio metrics, exhaustive enumeration for matchings and subset selection,
and scipy.stats / the stdlib statistics module for the statistical kernels.
"""

from __future__ import annotations

import itertools
import math
import statistics
from fractions import Fraction

import scipy.stats


# ---------------------------------------------------------------------------
# Bipartite matchings by exhaustive enumeration
# ---------------------------------------------------------------------------

def enumerate_matchings(pairs: list[tuple[int, int]]) -> list[frozenset[tuple[int, int]]]:
    """All (not necessarily maximal) matchings of the bipartite pair list."""
    findings = sorted({f for f, _ in pairs})
    by_finding = {f: [p for p in pairs if p[0] == f] for f in findings}
    matchings: list[frozenset] = []

    def extend(i: int, used_g: frozenset, chosen: frozenset):
        if i == len(findings):
            matchings.append(chosen)
            return
        f = findings[i]
        extend(i + 1, used_g, chosen)  # skip this finding
        for (_, g) in by_finding[f]:
            if g not in used_g:
                extend(i + 1, used_g | {g}, chosen | {(f, g)})

    extend(0, frozenset(), frozenset())
    return matchings


def max_matching_size(pairs: list[tuple[int, int]]) -> int:
    if not pairs:
        return 0
    return max(len(m) for m in enumerate_matchings(pairs))


def lexicographically_smallest_max_matching(
    pairs: list[tuple[int, int]],
) -> frozenset[tuple[int, int]]:
    """Among all maximum matchings, the one with the smallest sorted pair list."""
    matchings = enumerate_matchings(pairs)
    best_size = max((len(m) for m in matchings), default=0)
    maxima = [sorted(m) for m in matchings if len(m) == best_size]
    return frozenset(min(maxima)) if maxima else frozenset()


# ---------------------------------------------------------------------------
# Ratio metrics in exact arithmetic
# ---------------------------------------------------------------------------

def exact_prf(tp: int, fp: int, fn: int):
    """(precision, recall, f1, f0.5) as Fractions; None where undefined."""
    precision = Fraction(tp, tp + fp) if tp + fp > 0 else None
    recall = Fraction(tp, tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None or (precision == 0 and recall == 0):
        f1 = f05 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
        f05 = (
            Fraction(5, 4) * precision * recall
            / (Fraction(1, 4) * precision + recall)
        )
    return precision, recall, f1, f05


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def welch_oracle(a, b):
    """(t, p) via the reference statistics library."""
    result = scipy.stats.ttest_ind(list(a), list(b), equal_var=False)
    return float(result.statistic), float(result.pvalue)


def cohens_d_oracle(a, b):
    """Pooled-sd effect size using only the stdlib statistics module."""
    a, b = list(a), list(b)
    na, nb = len(a), len(b)
    va = statistics.variance(a)
    vb = statistics.variance(b)
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    return (statistics.fmean(a) - statistics.fmean(b)) / pooled


def pearson_oracle(x, y) -> float:
    return float(scipy.stats.pearsonr(list(x), list(y)).statistic)


def spearman_oracle(x, y) -> float:
    return float(scipy.stats.spearmanr(list(x), list(y)).statistic)


# ---------------------------------------------------------------------------
# Suite selection by enumeration
# ---------------------------------------------------------------------------

def exact_micro_score(counts: dict[str, tuple[int, int, int]], subset, metric: str):
    tp = sum(counts[t][0] for t in subset)
    fp = sum(counts[t][1] for t in subset)
    fn = sum(counts[t][2] for t in subset)
    p, r, f1, f05 = exact_prf(tp, fp, fn)
    value = {"precision": p, "recall": r, "f1": f1, "f0.5": f05}[metric]
    return None if value is None else float(value)


def brute_force_select(history, budget: float, metric: str = "f1"):
    """Enumerate every subset; mirror the production tie-break order.

    Returns (subset tuple, pearson, spearman, cost) or None if infeasible.
    ``history`` is an ethibench EvalHistory (data only; no production logic).
    """
    ids = tuple(sorted(t.target_id for t in history.targets))
    costs = {t.target_id: t.cost for t in history.targets}
    full_scores = [
        exact_micro_score(row.counts, ids, metric) for row in history.rows
    ]
    best = None
    for size in range(1, len(ids) + 1):
        for combo in itertools.combinations(ids, size):
            cost = sum(costs[t] for t in combo)
            if cost > budget:
                continue
            sub_scores = [
                exact_micro_score(row.counts, combo, metric) for row in history.rows
            ]
            usable = [
                (s, f) for s, f in zip(sub_scores, full_scores)
                if s is not None and f is not None
            ]
            if len(usable) < 2:
                continue
            xs = [u[0] for u in usable]
            ys = [u[1] for u in usable]
            if len(set(xs)) == 1 or len(set(ys)) == 1:
                continue
            r = pearson_oracle(xs, ys)
            rho = spearman_oracle(xs, ys)
            # Same 12-decimal tie granularity as the selection contract.
            key = (-round(r, 12), -round(rho, 12), cost, combo)
            if best is None or key < best[0]:
                best = (key, (combo, r, rho, cost))
    return None if best is None else best[1]
