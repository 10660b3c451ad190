/** Client-side validation for ground-truth entry drafts.
 *
 * Mirrors the server-side invariants so a bad promote form never produces a
 * request: id/name/description non-empty, cvss in [0, 10] with at most one
 * fractional digit, cwe empty or CWE-<digits>.
 */

import type { GtEntry } from './types.js';

const CWE_PATTERN = /^CWE-\d+$/;

export interface DraftInput {
  id: string;
  name: string;
  category: string;
  description: string;
  additional_info: string;
  cvss: string; // raw form value
  cwe: string; // raw form value, '' means none
}

export function validateEntryDraft(draft: DraftInput): string[] {
  const errors: string[] = [];
  if (!draft.id.trim()) errors.push('id must be non-empty');
  if (!draft.name.trim()) errors.push('name must be non-empty');
  if (!draft.description.trim()) errors.push('description must be non-empty');

  const cvss = Number(draft.cvss);
  if (draft.cvss.trim() === '' || Number.isNaN(cvss)) {
    errors.push('cvss must be a number');
  } else if (cvss < 0 || cvss > 10) {
    errors.push('cvss must be within [0.0, 10.0]');
  } else if (Math.abs(cvss * 10 - Math.round(cvss * 10)) > 1e-9) {
    errors.push('cvss must have at most one fractional digit');
  }

  const cwe = draft.cwe.trim();
  if (cwe && !CWE_PATTERN.test(cwe)) {
    errors.push('cwe must look like CWE-123 (or be left empty)');
  }
  return errors;
}

export function draftToEntry(draft: DraftInput): GtEntry {
  return {
    id: draft.id.trim(),
    name: draft.name.trim(),
    category: draft.category.trim(),
    description: draft.description.trim(),
    additional_info: draft.additional_info.trim(),
    cvss: Number(draft.cvss),
    cwe: draft.cwe.trim() || null,
  };
}
