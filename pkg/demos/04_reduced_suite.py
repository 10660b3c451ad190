"""Pick a cheaper target subset whose per-run scores track the full suite.

History: twelve runs over five targets with per-target costs. The selector
searches subsets under a 40% cost budget, maximizing Pearson agreement
between subset scores and full-suite scores (Spearman secondary).
"""

import random

from ethibench import EvalHistory, HistoryRow, TargetCost, select_suite, subset_scores

rng = random.Random(7)
targets = [
    TargetCost("vuln-shop", 14.0),
    TargetCost("paybank", 22.0),
    TargetCost("cms-demo", 9.0),
    TargetCost("api-lab", 6.0),
    TargetCost("ctf-one", 3.0),
]

# Synthetic history: each run has a latent skill level; per-target counts
# scale with skill plus noise, so informative targets track the full suite.
rows = []
for setup_i, setup in enumerate(["engine-a", "engine-b", "engine-c"]):
    for rep in (1, 2, 3, 4):
        skill = 0.35 + 0.15 * setup_i + rng.uniform(-0.08, 0.08)
        counts = {}
        for t_i, t in enumerate(targets):
            base = int(10 * skill) + rng.randint(-1, 2)
            fp = rng.randint(0, 4)
            fn = max(0, 10 - base) + rng.randint(0, 2)
            counts[t.target_id] = (max(0, base), fp, fn)
        rows.append(HistoryRow(setup=setup, replicate=rep, counts=counts))

history = EvalHistory(targets=tuple(targets), rows=tuple(rows))
full_cost = history.total_cost

selection = select_suite(history, budget_fraction=0.4, metric="f1")
print(f"full suite cost: {full_cost:.1f}; budget: {selection.budget:.1f}")
print(f"selected ({selection.search} search): {', '.join(selection.subset)}")
print(f"subset cost: {selection.total_cost:.1f}")
print(f"pearson={selection.pearson:.4f} spearman={selection.spearman:.4f}")

print("\nper-run subset vs full f1 (first six runs):")
for pair in subset_scores(history, selection.subset)[:6]:
    print(f"  {pair.setup} r{pair.replicate}: subset={pair.subset_score:.3f} "
          f"full={pair.full_score:.3f}")

print("\nproxy caveat: revalidate the subset as agents and targets evolve;")
print("it is a stand-in for frequent evaluation, not for periodic full runs.")
