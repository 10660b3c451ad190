"""A/B comparison of two setups: Welch's t-test plus Cohen's d per metric.

Three replicates per setup over two targets is a deliberately low-replication
regime: p-values alone are underpowered there, which is exactly why the
comparison always pairs them with an effect size.
"""

from ethibench import RunCounts, compare_setups
from ethibench.stats import format_comparison_table

# Per-run resolved counts, as the harness would read them back from
# evaluation reports: (setup, target, replicate) -> tp, fp, fn.
rows = []
counts = {
    # setup A is a little better on both targets, with some run-to-run noise
    ("engine-a", "shop", 1): (6, 2, 4), ("engine-a", "shop", 2): (7, 1, 3),
    ("engine-a", "shop", 3): (6, 3, 4),
    ("engine-a", "bank", 1): (9, 3, 11), ("engine-a", "bank", 2): (8, 2, 12),
    ("engine-a", "bank", 3): (10, 4, 10),
    ("engine-b", "shop", 1): (5, 4, 5), ("engine-b", "shop", 2): (4, 2, 6),
    ("engine-b", "shop", 3): (5, 3, 5),
    ("engine-b", "bank", 1): (7, 6, 13), ("engine-b", "bank", 2): (6, 5, 14),
    ("engine-b", "bank", 3): (8, 7, 12),
}
for (setup, target, rep), (tp, fp, fn) in counts.items():
    rows.append(RunCounts(setup=setup, target_id=target, replicate=rep,
                          tp=tp, fp=fp, fn=fn))

# Micro aggregation pools counts across targets before scoring each replicate.
comparison = compare_setups(rows, "engine-a", "engine-b",
                            metrics=("f1", "f0.5", "recall", "precision"))
print(format_comparison_table(comparison))

print()
for row in comparison.rows:
    verdict = "large" if abs(row.cohens_d) > 0.8 else "modest"
    power_note = " (underpowered: read d, not just p)" if row.p_value > 0.05 else ""
    print(f"{row.metric:10s} effect size {row.cohens_d:+.2f} -> {verdict}{power_note}")
