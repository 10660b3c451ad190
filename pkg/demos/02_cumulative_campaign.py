"""Cumulative scoring: merge replicates, re-deduplicate, score as one campaign.

Two stochastic runs explore different corners of the target. Per-run recall
is mediocre; merged and re-resolved, the campaign recovers the union of their
true positives while repeated reports surface as duplicates, not extra credit.
"""

from datetime import datetime, timedelta, timezone

from ethibench import Finding, JudgeConfig, RunRecord, cumulate
from ethibench.campaign import timeline_csv, timeline

from demo_world import make_target  # shared toy target builder

gts = make_target(n_entries=8)
START = datetime(2026, 3, 1, 9, 0, tzinfo=timezone.utc)


def run(replicate, named_ids, n_noise):
    findings = []
    for gt_id in named_ids:
        findings.append(
            Finding(index=len(findings), title=f"issue matching {gt_id}",
                    description="details", steps_to_reproduce="steps",
                    timestamp=START + timedelta(minutes=2 * len(findings) + 1))
        )
    for j in range(n_noise):
        findings.append(
            Finding(index=len(findings), title=f"spurious zz{replicate}{j} report",
                    description="does not correspond to anything",
                    timestamp=START + timedelta(minutes=2 * len(findings) + 1))
        )
    return RunRecord(
        run_id=f"agent.demo.r{replicate}", setup="agent", target_id=gts.target_id,
        replicate=replicate, findings=tuple(findings),
        started_at=START, ended_at=START + timedelta(seconds=600),
        duration=600.0, cost=2.0,
    )


runs = [
    run(1, ["gt-00", "gt-01", "gt-02"], n_noise=1),
    run(2, ["gt-02", "gt-03", "gt-04", "gt-05"], n_noise=2),
]

result = cumulate(runs, gts, JudgeConfig(backend="lexical"))

print(f"per-run tp: {[m.tp for m in result.per_run_metrics]}")
print(f"cumulative tp: {result.metrics.tp}  (union of distinct entries)")
print(f"cumulative dup: {result.metrics.dup} (gt-02 reported by both runs)")
print(f"cumulative fp: {result.metrics.fp}  (false positives accumulate)")

print("\ncumulative minus per-run mean, percentage points:")
for metric, delta in result.delta_pct.items():
    print(f"  {metric:10s} {delta:+7.2f}")

print("\ntrue-positive overlap between runs (diagonal = per-run tp):")
for run_id, row in zip(result.tp_overlap.run_ids, result.tp_overlap.matrix):
    print(f"  {run_id}: {list(row)}")
print(f"exclusive: {result.tp_overlap.exclusive}")

print("\ntimeline CSV for run 1 (plot-ready series):")
print(timeline_csv(timeline(runs[0], result.per_run_resolutions[0], gts)))
