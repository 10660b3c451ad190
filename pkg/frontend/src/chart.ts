/** Inline SVG line chart for timeline series; no chart library needed for
 * two step-series and an axis. */

import type { TimelineRow } from './types.js';

const WIDTH = 420;
const HEIGHT = 160;
const PAD = 28;

function scale(value: number, max: number, span: number): number {
  return max === 0 ? 0 : (value / max) * span;
}

/** Step-line path through (t, value) points, starting at the origin. */
export function stepPath(rows: TimelineRow[], column: 1 | 2, tMax: number, yMax: number): string {
  let x = PAD;
  let y = HEIGHT - PAD;
  const parts = [`M ${x} ${y}`];
  for (const row of rows) {
    const nx = PAD + scale(row[0], tMax, WIDTH - 2 * PAD);
    const ny = HEIGHT - PAD - scale(row[column], yMax, HEIGHT - 2 * PAD);
    parts.push(`L ${nx.toFixed(1)} ${y.toFixed(1)}`);
    parts.push(`L ${nx.toFixed(1)} ${ny.toFixed(1)}`);
    x = nx;
    y = ny;
  }
  return parts.join(' ');
}

export function timelineSvg(rows: TimelineRow[]): string {
  if (rows.length === 0) return '<svg class="timeline" role="img"></svg>';
  const tMax = Math.max(...rows.map((r) => r[0]), 1);
  const yMax = Math.max(...rows.map((r) => Math.max(r[1], r[2])), 1);
  const tpPath = stepPath(rows, 1, tMax, yMax);
  const fpPath = stepPath(rows, 2, tMax, yMax);
  const final = rows[rows.length - 1];
  return `<svg class="timeline" role="img" viewBox="0 0 ${WIDTH} ${HEIGHT}"
      aria-label="cumulative tp ${final[1]} and fp ${final[2]} over ${final[0]} seconds">
    <line x1="${PAD}" y1="${HEIGHT - PAD}" x2="${WIDTH - PAD}" y2="${HEIGHT - PAD}" class="axis"/>
    <line x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${HEIGHT - PAD}" class="axis"/>
    <path d="${tpPath}" class="series series-tp" fill="none"/>
    <path d="${fpPath}" class="series series-fp" fill="none"/>
    <text x="${WIDTH - PAD}" y="${PAD}" text-anchor="end" class="legend">
      tp ${final[1]} / fp ${final[2]}</text>
  </svg>`;
}
