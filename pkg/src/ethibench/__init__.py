"""Finding-level evaluation harness for AI pentesting agents.

Scores agent-reported findings against expert ground truth: permissive
pairwise semantic matching, one-to-one bipartite resolution, detection and
efficiency metrics, cumulative campaign scoring, A/B statistics, reduced
suite selection, and a triage loop for continuous ground-truth maintenance.
"""

__version__ = "0.1.0"

from .gt_store import (  # noqa: F401
    DEFAULT_SEVERITY_BANDS,
    GroundTruthEntry,
    GroundTruthRevision,
    GroundTruthSet,
    GroundTruthStore,
    SeverityBand,
    apply_revision,
    load_ground_truth,
    save_ground_truth,
    severity_points,
)
from .ingest import Finding, RunRecord, RunRegistry, load_findings  # noqa: F401
from .judge import (  # noqa: F401
    CalibrationReport,
    JudgeCache,
    JudgeConfig,
    LabeledFinding,
    MatchEdge,
    MatchResult,
    calibrate,
    candidate_matches,
    judge_pair,
    render_prompt,
)
from .resolve import Resolution, classify_counts, resolve  # noqa: F401
from .metrics import (  # noqa: F401
    MetricsReport,
    aggregate_runs,
    compute_metrics,
    metric_from_counts,
)
from .campaign import (  # noqa: F401
    CumulativeResult,
    OverlapReport,
    TimelinePoint,
    cumulate,
    delta_vs_mean,
    timeline,
    tp_overlap,
)
from .stats import (  # noqa: F401
    PairwiseComparison,
    RunCounts,
    WelchResult,
    cohens_d,
    compare_setups,
    pearson,
    spearman,
    welch_t,
)
from .suite import (  # noqa: F401
    EvalHistory,
    HistoryRow,
    SuiteSelection,
    TargetCost,
    select_suite,
    subset_scores,
)
from .evaluation import EvaluationResult, evaluate_run  # noqa: F401
from .config import HarnessConfig, load_config  # noqa: F401
