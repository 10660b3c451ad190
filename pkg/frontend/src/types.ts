/** Types mirroring the review API JSON payloads. The UI never computes
 * metrics; every number it displays comes from one of these payloads. */

export interface GtEntry {
  id: string;
  name: string;
  category: string;
  description: string;
  additional_info: string;
  cvss: number;
  cwe: string | null;
}

export interface FindingView {
  index: number;
  title: string;
  description: string;
  steps_to_reproduce: string;
  timestamp: string | null;
}

export type Classification = 'fp' | 'dup';
export type DecisionKind =
  | 'confirm_fp'
  | 'promote_new_gt'
  | 'map_to_existing'
  | 'refine_gt';

export interface TriageItem {
  item_id: string;
  run_id: string;
  target_id: string;
  setup: string;
  finding: FindingView;
  classification: Classification;
  candidate_gt_ids: string[];
  candidate_entries: GtEntry[];
  edge_rationales: Record<string, string>;
  gt_version: number;
  status: 'pending' | 'decided';
  decision: unknown;
}

export interface DecisionBody {
  kind: DecisionKind;
  reviewer?: string;
  gt_id?: string | null;
  entry?: Partial<GtEntry> | null;
  refined_fields?: Record<string, unknown> | null;
}

export interface Counts {
  tp: number;
  fp: number;
  fn: number;
  dup: number;
}

export interface Metrics extends Counts {
  precision: number | null;
  recall: number | null;
  f1: number | null;
  'f0.5': number | null;
  severity_score: number;
  cwe_coverage: number;
  duration: number | null;
  cost: number | null;
  scope: string;
}

/** Timeline rows are [t_seconds, tp, fp, severity, cwe]. */
export type TimelineRow = [number, number, number, number, number];

export interface RunSummary {
  run_id: string;
  setup: string;
  replicate: number;
  ground_truth_version: number;
  counts: Counts;
  metrics: Metrics;
  judge_error_count: number;
  timeline: TimelineRow[];
}

export interface OverlapView {
  run_ids: string[];
  matrix: number[][];
  exclusive: Record<string, number>;
  union_size: number;
}

export interface CampaignView {
  setup: string;
  target_id: string;
  k: number;
  run_ids: string[];
  cumulative: Metrics;
  per_run: Metrics[];
  delta_pct: Record<string, number | null>;
  overlap: OverlapView | null;
}

export interface ResultsPayload {
  target_id: string;
  ground_truth_version: number;
  runs: RunSummary[];
  cumulative: CampaignView[];
}

export interface TargetInfo {
  target_id: string;
  version: number;
  entries: number;
  runs: number;
}

export interface JobStatus {
  job_id: string;
  target_id: string;
  status: 'pending' | 'running' | 'done' | 'failed';
  detail: string;
  result: { ground_truth_version: number; reevaluated_runs: string[] } | null;
}

export interface ReevaluateResponse {
  status: 'pending' | 'noop';
  job_id?: string;
  notice?: string;
}

export interface GroundTruthPayload {
  target_id: string;
  version: number;
  entries: GtEntry[];
  retired: GtEntry[];
}
