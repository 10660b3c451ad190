/** Application wiring: hash routing, state, event delegation.
 *
 * All rendering goes through the pure functions in views.ts; this module owns
 * the DOM and the API client. The API is authoritative: every mutation is
 * followed by a refetch, so reloads are safe mid-session and a 409 from a
 * concurrent reviewer simply refreshes the queue.
 */

import { ApiClient, ApiError } from './api.js';
import type { GtEntry, TriageItem } from './types.js';
import { draftToEntry, validateEntryDraft, type DraftInput } from './validation.js';
import {
  renderBanner,
  renderQueuePage,
  renderResultsPage,
  renderTargetPicker,
  escapeHtml,
} from './views.js';

type Route = 'queue' | 'results';

interface State {
  targets: { target_id: string }[];
  target: string;
  route: Route;
  items: TriageItem[];
  entries: GtEntry[];
  selectedItemId: string | null;
}

const api = new ApiClient('');
const state: State = {
  targets: [],
  target: '',
  route: 'queue',
  items: [],
  entries: [],
  selectedItemId: null,
};

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function showBanner(kind: 'error' | 'notice', message: string, actionHtml = ''): void {
  el('banner').innerHTML = renderBanner(kind, message, actionHtml);
}

function clearBanner(): void {
  el('banner').innerHTML = '';
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    if (error.status === 0) return `API unreachable: ${error.message}`;
    return `${error.status}: ${error.message}`;
  }
  if (error instanceof TypeError) return `API unreachable: ${error.message}`;
  return String(error);
}

// ---------------------------------------------------------------------------
// Data loading and rendering
// ---------------------------------------------------------------------------

async function refresh(): Promise<void> {
  try {
    state.targets = await api.targets();
    if (!state.target && state.targets.length) {
      state.target = state.targets[0].target_id;
    }
    el('picker-slot').innerHTML = renderTargetPicker(
      state.targets as never,
      state.target,
    );
    if (!state.target) {
      el('main').innerHTML = '<div class="empty-state">No targets in the store yet.</div>';
      return;
    }
    if (state.route === 'queue') {
      const [items, gt] = await Promise.all([
        api.queue(state.target),
        api.groundTruth(state.target),
      ]);
      state.items = items;
      state.entries = gt.entries;
      if (!items.some((i) => i.item_id === state.selectedItemId)) {
        state.selectedItemId = null;
      }
      const selected = items.find((i) => i.item_id === state.selectedItemId) ?? null;
      el('main').innerHTML = renderQueuePage(items, selected, state.entries);
    } else {
      const results = await api.results(state.target);
      el('main').innerHTML = renderResultsPage(results);
    }
    setActiveNav();
  } catch (error) {
    showBanner('error', describeError(error));
  }
}

function setActiveNav(): void {
  for (const link of document.querySelectorAll('nav a')) {
    link.classList.toggle(
      'active',
      link.getAttribute('href') === `#/${state.route}`,
    );
  }
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

const REEVALUATE_ACTION =
  '<button data-action="reevaluate" class="inline-action">re-evaluate target now</button>';

async function submitDecision(itemId: string, body: Parameters<ApiClient['decide']>[1]) {
  try {
    await api.decide(itemId, body);
    clearBanner();
    if (body.kind === 'promote_new_gt' || body.kind === 'refine_gt') {
      showBanner('notice', `ground truth updated (${body.kind}).`, REEVALUATE_ACTION);
    } else {
      showBanner('notice', `decision recorded (${body.kind}).`);
    }
    state.selectedItemId = null;
    await refresh();
  } catch (error) {
    showBanner('error', describeError(error));
    if (error instanceof ApiError && error.status === 409) {
      await refresh(); // someone else decided it; resync
    }
  }
}

function readPromoteDraft(form: HTMLFormElement): DraftInput {
  const value = (name: string) =>
    (form.elements.namedItem(name) as HTMLInputElement | HTMLTextAreaElement | null)?.value ?? '';
  return {
    id: value('id'),
    name: value('name'),
    category: value('category'),
    description: value('description'),
    additional_info: value('additional_info'),
    cvss: value('cvss'),
    cwe: value('cwe'),
  };
}

async function handlePromote(form: HTMLFormElement): Promise<void> {
  const itemId = form.dataset.itemId!;
  const draft = readPromoteDraft(form);
  const errors = validateEntryDraft(draft);
  const errorBox = form.querySelector('.form-errors');
  if (errors.length) {
    // Invalid draft: render errors locally, send nothing.
    if (errorBox) {
      errorBox.innerHTML = errors.map((e) => `<p>${escapeHtml(e)}</p>`).join('');
    }
    return;
  }
  await submitDecision(itemId, { kind: 'promote_new_gt', entry: draftToEntry(draft) });
}

async function handleReevaluate(): Promise<void> {
  try {
    const response = await api.reevaluate(state.target);
    if (response.status === 'noop') {
      showBanner('notice', response.notice ?? 'nothing to re-evaluate');
      return;
    }
    showBanner('notice', `re-evaluation ${response.job_id} running…`);
    const job = await api.waitForJob(response.job_id!);
    if (job.status === 'failed') {
      showBanner('error', `re-evaluation failed: ${job.detail}`);
    } else {
      showBanner(
        'notice',
        `re-evaluated ${job.result?.reevaluated_runs.length ?? 0} runs at ground-truth v${job.result?.ground_truth_version}.`,
      );
      await refresh();
    }
  } catch (error) {
    showBanner('error', describeError(error));
  }
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

function closestAction(target: EventTarget | null): HTMLElement | null {
  return target instanceof Element ? target.closest<HTMLElement>('[data-action]') : null;
}

document.addEventListener('click', (event) => {
  const node = closestAction(event.target);
  if (!node) return;
  const action = node.dataset.action;
  if (action === 'submit-promote') return; // handled by the submit listener
  event.preventDefault();
  const holder = node.closest<HTMLElement>('[data-item-id]');
  const itemId = holder?.dataset.itemId ?? '';
  switch (action) {
    case 'select-item':
      state.selectedItemId = node.dataset.itemId ?? null;
      void refresh();
      break;
    case 'pick-target':
      break; // handled on change
    case 'confirm-fp':
      void submitDecision(itemId, { kind: 'confirm_fp' });
      break;
    case 'map-existing': {
      const select = document.getElementById('map-select') as HTMLSelectElement | null;
      void submitDecision(itemId, { kind: 'map_to_existing', gt_id: select?.value ?? '' });
      break;
    }
    case 'refine-gt': {
      const select = document.getElementById('refine-select') as HTMLSelectElement | null;
      const text = document.getElementById('refine-description') as HTMLTextAreaElement | null;
      void submitDecision(itemId, {
        kind: 'refine_gt',
        gt_id: select?.value ?? '',
        refined_fields: { description: text?.value ?? '' },
      });
      break;
    }
    case 'reevaluate':
      void handleReevaluate();
      break;
  }
});

document.addEventListener('submit', (event) => {
  const form = event.target;
  if (form instanceof HTMLFormElement && form.id === 'promote-form') {
    event.preventDefault();
    void handlePromote(form);
  }
});

document.addEventListener('change', (event) => {
  const node = event.target;
  if (node instanceof HTMLSelectElement && node.id === 'target-picker') {
    state.target = node.value;
    state.selectedItemId = null;
    void refresh();
  }
});

window.addEventListener('hashchange', () => {
  state.route = window.location.hash.startsWith('#/results') ? 'results' : 'queue';
  void refresh();
});

state.route = window.location.hash.startsWith('#/results') ? 'results' : 'queue';
void refresh();
