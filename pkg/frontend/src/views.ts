/** HTML string renderers. Pure functions from API payloads to markup so the
 * displayed numbers are directly testable against the payloads. */

import type {
  CampaignView,
  GtEntry,
  Metrics,
  ResultsPayload,
  RunSummary,
  TargetInfo,
  TriageItem,
} from './types.js';
import { timelineSvg } from './chart.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

/** Ratio metrics render with 4 digits; undefined renders as a dash, never 0. */
export function fmtRatio(value: number | null | undefined): string {
  if (value === null || value === undefined) return '—';
  return value.toFixed(4);
}

export function fmtDelta(value: number | null | undefined): string {
  if (value === null || value === undefined) return '—';
  const sign = value >= 0 ? '+' : '';
  return `${sign}${value.toFixed(2)} pp`;
}

export function renderBanner(kind: 'error' | 'notice', message: string, actionHtml = ''): string {
  return `<div class="banner banner-${kind}" role="alert">${escapeHtml(message)}${actionHtml}</div>`;
}

export function renderTargetPicker(targets: TargetInfo[], selected: string): string {
  const options = targets
    .map(
      (t) =>
        `<option value="${escapeHtml(t.target_id)}"${t.target_id === selected ? ' selected' : ''}>` +
        `${escapeHtml(t.target_id)} (v${t.version}, ${t.entries} entries, ${t.runs} runs)</option>`,
    )
    .join('');
  return `<label class="picker">target
    <select id="target-picker" data-action="pick-target">${options}</select>
  </label>`;
}

// ---------------------------------------------------------------------------
// Queue
// ---------------------------------------------------------------------------

export function renderQueueList(items: TriageItem[], selectedId: string | null): string {
  if (items.length === 0) {
    return `<div class="empty-state" id="queue-empty">Nothing to triage: no pending unmatched findings for this target.</div>`;
  }
  const rows = items
    .map((item) => {
      const selected = item.item_id === selectedId ? ' row-selected' : '';
      return `<tr class="queue-row${selected}" data-action="select-item" data-item-id="${escapeHtml(item.item_id)}">
        <td><span class="badge badge-${item.classification}">${item.classification}</span></td>
        <td>${escapeHtml(item.finding.title)}</td>
        <td>${escapeHtml(item.run_id)}</td>
        <td>${item.candidate_gt_ids.length ? escapeHtml(item.candidate_gt_ids.join(', ')) : '—'}</td>
      </tr>`;
    })
    .join('');
  return `<table class="queue-table" id="queue-table">
    <thead><tr><th>class</th><th>finding</th><th>run</th><th>candidates</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

function findingCard(item: TriageItem): string {
  const f = item.finding;
  return `<div class="card finding-card">
    <h3>Finding #${f.index} <span class="badge badge-${item.classification}">${item.classification}</span></h3>
    <dl>
      <dt>Title</dt><dd>${escapeHtml(f.title)}</dd>
      <dt>Description</dt><dd>${escapeHtml(f.description)}</dd>
      <dt>Steps to reproduce</dt><dd>${escapeHtml(f.steps_to_reproduce) || '<em>none</em>'}</dd>
      <dt>Discovered</dt><dd>${f.timestamp ? escapeHtml(f.timestamp) : '<em>no timestamp</em>'}</dd>
    </dl>
  </div>`;
}

function candidatePanel(item: TriageItem): string {
  const cards = item.candidate_entries
    .map((entry) => {
      const rationale = item.edge_rationales[entry.id] ?? '';
      return `<div class="card gt-card">
        <h4>${escapeHtml(entry.id)}: ${escapeHtml(entry.name)}</h4>
        <p class="meta">${escapeHtml(entry.category)} · CVSS ${entry.cvss}${entry.cwe ? ` · ${escapeHtml(entry.cwe)}` : ''}</p>
        <p>${escapeHtml(entry.description)}</p>
        ${rationale ? `<p class="rationale">judge: ${escapeHtml(rationale)}</p>` : ''}
      </div>`;
    })
    .join('');
  return `<div class="candidate-panel">
    <h3>Candidate ground-truth entries</h3>
    ${cards || '<p><em>none</em></p>'}
  </div>`;
}

function promoteForm(item: TriageItem): string {
  return `<form class="decision-form" id="promote-form" data-item-id="${escapeHtml(item.item_id)}">
    <h3>Promote to new ground-truth entry</h3>
    <div class="form-errors" id="promote-errors"></div>
    <label>id <input name="id" placeholder="unique stable id"></label>
    <label>name <input name="name" value="${escapeHtml(item.finding.title)}"></label>
    <label>category <input name="category"></label>
    <label>description <textarea name="description">${escapeHtml(item.finding.description)}</textarea></label>
    <label>additional info <input name="additional_info"></label>
    <label>cvss <input name="cvss" inputmode="decimal" placeholder="e.g. 7.5"></label>
    <label>cwe <input name="cwe" placeholder="CWE-89 (optional)"></label>
    <button type="submit" data-action="submit-promote">promote</button>
  </form>`;
}

function decisionButtons(item: TriageItem, entries: GtEntry[]): string {
  const options = entries
    .map((e) => `<option value="${escapeHtml(e.id)}">${escapeHtml(e.id)}: ${escapeHtml(e.name)}</option>`)
    .join('');
  return `<div class="decision-actions" data-item-id="${escapeHtml(item.item_id)}">
    <button data-action="confirm-fp">confirm false positive</button>
    <div class="map-row">
      <select id="map-select">${options}</select>
      <button data-action="map-existing">map to selected entry</button>
    </div>
    <div class="refine-row">
      <select id="refine-select">${options}</select>
      <textarea id="refine-description" placeholder="refined description"></textarea>
      <button data-action="refine-gt">refine selected entry</button>
    </div>
  </div>`;
}

export function renderItemDetail(item: TriageItem, entries: GtEntry[]): string {
  const sidePanel = item.classification === 'dup' ? candidatePanel(item) : promoteForm(item);
  return `<div class="detail" id="item-detail">
    <div class="side-by-side">
      ${findingCard(item)}
      ${sidePanel}
    </div>
    ${item.classification === 'dup' ? promoteForm(item) : ''}
    ${decisionButtons(item, entries)}
  </div>`;
}

export function renderQueuePage(
  items: TriageItem[],
  selected: TriageItem | null,
  entries: GtEntry[],
): string {
  return `<section class="queue-page">
    <h2>Triage queue <span class="count">(${items.length} pending)</span></h2>
    ${renderQueueList(items, selected?.item_id ?? null)}
    ${selected ? renderItemDetail(selected, entries) : ''}
  </section>`;
}

// ---------------------------------------------------------------------------
// Results dashboard
// ---------------------------------------------------------------------------

function metricCells(m: Metrics): string {
  return `<td>${m.tp}</td><td>${m.fp}</td><td>${m.fn}</td><td>${m.dup}</td>
    <td>${fmtRatio(m.precision)}</td><td>${fmtRatio(m.recall)}</td>
    <td>${fmtRatio(m.f1)}</td><td>${fmtRatio(m['f0.5'])}</td>
    <td>${m.severity_score}</td><td>${m.cwe_coverage}</td>`;
}

function runRow(run: RunSummary): string {
  return `<tr class="run-row" data-run-id="${escapeHtml(run.run_id)}">
    <td>${escapeHtml(run.setup)}</td><td>${run.replicate}</td>
    ${metricCells(run.metrics)}
    <td>${run.judge_error_count ? `<span class="badge badge-error">${run.judge_error_count}</span>` : '0'}</td>
  </tr>`;
}

const METRIC_HEADER = `<th>tp</th><th>fp</th><th>fn</th><th>dup</th>
  <th>precision</th><th>recall</th><th>f1</th><th>f0.5</th>
  <th>severity</th><th>cwe</th>`;

function campaignSection(campaign: CampaignView): string {
  const deltas = Object.entries(campaign.delta_pct)
    .map(([metric, delta]) => `<span class="chip">Δ ${escapeHtml(metric)}: ${fmtDelta(delta)}</span>`)
    .join(' ');
  let overlap = '';
  if (campaign.overlap) {
    const header = campaign.overlap.run_ids
      .map((id) => `<th>${escapeHtml(id.split('.').pop() ?? id)}</th>`)
      .join('');
    const body = campaign.overlap.matrix
      .map(
        (row, i) =>
          `<tr><th>${escapeHtml(campaign.overlap!.run_ids[i].split('.').pop() ?? '')}</th>${row
            .map((v) => `<td>${v}</td>`)
            .join('')}</tr>`,
      )
      .join('');
    overlap = `<table class="overlap-table"><caption>TP overlap (diagonal = per-run tp); union ${campaign.overlap.union_size}</caption>
      <thead><tr><th></th>${header}</tr></thead><tbody>${body}</tbody></table>`;
  }
  return `<div class="campaign" data-setup="${escapeHtml(campaign.setup)}">
    <h3>Cumulative: ${escapeHtml(campaign.setup)} (k=${campaign.k})</h3>
    <table class="metrics-table"><thead><tr>${METRIC_HEADER}</tr></thead>
      <tbody><tr class="cumulative-row">${metricCells(campaign.cumulative)}</tr></tbody></table>
    <p class="deltas">cumulative minus per-run mean: ${deltas}</p>
    ${overlap}
  </div>`;
}

export function renderResultsPage(results: ResultsPayload): string {
  const runRows = results.runs.map(runRow).join('');
  const runsTable = results.runs.length
    ? `<table class="metrics-table" id="runs-table">
        <thead><tr><th>setup</th><th>rep</th>${METRIC_HEADER}<th>judge errors</th></tr></thead>
        <tbody>${runRows}</tbody>
      </table>`
    : `<div class="empty-state">No evaluations yet for this target.</div>`;
  const charts = results.runs
    .filter((run) => run.timeline.length > 0)
    .map(
      (run) => `<figure class="timeline-figure">
        <figcaption>${escapeHtml(run.run_id)} (v${run.ground_truth_version})</figcaption>
        ${timelineSvg(run.timeline)}
      </figure>`,
    )
    .join('');
  const campaigns = results.cumulative.map(campaignSection).join('');
  return `<section class="results-page">
    <h2>Results: ${escapeHtml(results.target_id)}
      <span class="count">(ground truth v${results.ground_truth_version})</span></h2>
    ${runsTable}
    ${campaigns}
    ${charts ? `<h3>Discovery timelines</h3><div class="charts">${charts}</div>` : ''}
  </section>`;
}
