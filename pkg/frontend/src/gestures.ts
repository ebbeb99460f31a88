/**
 * Keyboard and drag gestures mapped to review-service edits.
 *
 * Keyboard-first: annotation throughput is the bottleneck, so every
 * correction has a key. Each gesture produces exactly one edit payload
 * (or null when it does not apply); sending and revision bookkeeping
 * belong to the caller.
 *
 *   1..4        relabel the selected segment to SB / MB / CRS / HS
 *   Delete/x    delete the selected segment
 *   m           merge the selected (same-label, adjacent) segments
 *   s           split the selected segment at the cursor time
 *   drag edge   move a segment boundary
 */

import { Edit, EVENT_LABELS, Segment } from './schema.js';

const RELABEL_KEYS: Record<string, (typeof EVENT_LABELS)[number]> = {
  '1': 'SB',
  '2': 'MB',
  '3': 'CRS',
  '4': 'HS',
};

export interface GestureContext {
  selected: number[];
  segments: Segment[];
  /** current cursor position on the time axis, seconds */
  cursorT: number;
}

export function keyToEdit(key: string, ctx: GestureContext): Edit | null {
  const primary = ctx.selected[0];
  const label = RELABEL_KEYS[key];
  if (label !== undefined) {
    if (primary === undefined) return null;
    return { op: 'relabel', segment_id: primary, label };
  }
  if (key === 'Delete' || key === 'Backspace' || key === 'x') {
    if (primary === undefined) return null;
    return { op: 'delete', segment_id: primary };
  }
  if (key === 'm' || key === 'M') {
    if (ctx.selected.length < 2) return null;
    const chosen = ctx.segments.filter((s) => ctx.selected.includes(s.id));
    if (chosen.length !== ctx.selected.length) return null;
    const labels = new Set(chosen.map((s) => s.label));
    if (labels.size !== 1) return null;
    const ordered = [...chosen].sort((a, b) => a.start_s - b.start_s).map((s) => s.id);
    return { op: 'merge', segment_ids: ordered };
  }
  if (key === 's' || key === 'S') {
    if (primary === undefined) return null;
    const seg = ctx.segments.find((s) => s.id === primary);
    if (!seg || !(seg.start_s < ctx.cursorT && ctx.cursorT < seg.end_s)) return null;
    return { op: 'split', segment_id: primary, t: round6(ctx.cursorT) };
  }
  return null;
}

export interface BoundaryDrag {
  segmentId: number;
  edge: 'start' | 'end';
  /** drop position on the time axis, seconds */
  t: number;
}

export function dragToEdit(drag: BoundaryDrag, segments: Segment[]): Edit | null {
  const seg = segments.find((s) => s.id === drag.segmentId);
  if (!seg) return null;
  const t = round6(drag.t);
  if (drag.edge === 'start' ? t >= seg.end_s : t <= seg.start_s) return null;
  return { op: 'move-boundary', segment_id: drag.segmentId, edge: drag.edge, t };
}

export interface InsertDrag {
  startT: number;
  endT: number;
  label: (typeof EVENT_LABELS)[number];
}

export function insertToEdit(drag: InsertDrag): Edit | null {
  const start = round6(Math.min(drag.startT, drag.endT));
  const end = round6(Math.max(drag.startT, drag.endT));
  if (!(end > start)) return null;
  return { op: 'insert', start_s: start, end_s: end, label: drag.label };
}

/** Label files carry 6 decimals; keep payloads on the same grid. */
function round6(t: number): number {
  return Math.round(t * 1e6) / 1e6;
}
