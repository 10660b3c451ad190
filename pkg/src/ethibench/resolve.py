"""One-to-one resolution of the permissive candidate graph.

The candidate edges form a bipartite graph between findings and ground-truth
entries. We select a maximum-cardinality matching so each entry is credited
at most once, then classify every finding:

* tp  — assigned in the matching
* dup — had at least one candidate edge but lost the assignment
* fp  — had no candidate edges at all

Among equal-cardinality matchings the one whose sorted (finding_index,
entry file position) pair list is lexicographically smallest is chosen, which
makes the output reproducible across edge orderings and implementations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import DataError
from .gt_store import GroundTruthSet

if TYPE_CHECKING:  # pragma: no cover
    from .judge import MatchEdge


@dataclass(frozen=True)
class Resolution:
    """Final assignment plus the classification of every finding and entry."""

    assignment: frozenset[tuple[int, str]]
    tp_findings: frozenset[int]
    fp_findings: frozenset[int]
    dup_findings: frozenset[int]
    fn_gt_ids: frozenset[str]
    judge_errors: tuple[tuple[int, str], ...] = ()


def _matching_size(pairs: Sequence[tuple[int, int]]) -> int:
    """Maximum-cardinality matching size of a bipartite pair list."""
    if not pairs:
        return 0
    rows = sorted({p[0] for p in pairs})
    cols = sorted({p[1] for p in pairs})
    row_ix = {r: i for i, r in enumerate(rows)}
    col_ix = {c: i for i, c in enumerate(cols)}
    data = np.ones(len(pairs), dtype=np.int8)
    matrix = csr_matrix(
        (data, ([row_ix[r] for r, _ in pairs], [col_ix[c] for _, c in pairs])),
        shape=(len(rows), len(cols)),
    )
    match = maximum_bipartite_matching(matrix, perm_type="column")
    return int((match != -1).sum())


def _lexicographic_maximum_matching(
    pairs: list[tuple[int, int]],
) -> list[tuple[int, int]]:
    """Greedy selection with an exact feasibility oracle.

    Scanning candidate edges in ascending order and keeping an edge whenever a
    maximum matching containing the kept set still exists yields the
    lexicographically smallest maximum matching.
    """
    total = _matching_size(pairs)
    chosen: list[tuple[int, int]] = []
    used_f: set[int] = set()
    used_g: set[int] = set()
    for fi, gi in sorted(pairs):
        if len(chosen) == total:
            break
        if fi in used_f or gi in used_g:
            continue
        rest = [
            (f, g)
            for f, g in pairs
            if f not in used_f and g not in used_g and f != fi and g != gi
        ]
        if 1 + len(chosen) + _matching_size(rest) == total:
            chosen.append((fi, gi))
            used_f.add(fi)
            used_g.add(gi)
    return chosen


def resolve(
    edges: Iterable["MatchEdge"],
    n_findings: int,
    gts: GroundTruthSet,
    *,
    judge_errors: Iterable[tuple[int, str]] = (),
) -> Resolution:
    """Resolve candidate edges into a one-to-one assignment and classify."""
    position = {e.id: i for i, e in enumerate(gts.entries)}
    ids = list(gts.active_ids)

    pair_set: set[tuple[int, int]] = set()
    for edge in edges:
        if not edge.verdict:
            continue
        if edge.gt_id not in position:
            raise DataError(f"edge references unknown entry {edge.gt_id!r}")
        if not (0 <= edge.finding_index < n_findings):
            raise DataError(f"edge references invalid finding index {edge.finding_index}")
        pair_set.add((edge.finding_index, position[edge.gt_id]))

    chosen = _lexicographic_maximum_matching(sorted(pair_set))

    assigned_f = {f for f, _ in chosen}
    assigned_g = {g for _, g in chosen}
    edged_f = {f for f, _ in pair_set}

    tp = frozenset(assigned_f)
    dup = frozenset(edged_f - assigned_f)
    fp = frozenset(set(range(n_findings)) - edged_f)
    fn = frozenset(ids[g] for g in range(len(ids)) if g not in assigned_g)

    return Resolution(
        assignment=frozenset((f, ids[g]) for f, g in chosen),
        tp_findings=tp,
        fp_findings=fp,
        dup_findings=dup,
        fn_gt_ids=fn,
        judge_errors=tuple(sorted(judge_errors)),
    )


def classify_counts(r: Resolution) -> dict[str, int]:
    return {
        "tp": len(r.tp_findings),
        "fp": len(r.fp_findings),
        "fn": len(r.fn_gt_ids),
        "dup": len(r.dup_findings),
    }
