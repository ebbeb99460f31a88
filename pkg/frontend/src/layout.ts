/**
 * Pure geometry: mapping between recording time and pixel coordinates on
 * the shared axis used by the waveform, spectrogram, and segment overlay.
 */

import { Segment } from './schema.js';

export interface OverlayBox {
  segmentId: number;
  label: string;
  /** fractional horizontal extent within the drawing area, both in [0, 1] */
  left: number;
  width: number;
}

export function timeToFraction(t: number, t0: number, t1: number): number {
  return (t - t0) / (t1 - t0);
}

export function fractionToTime(f: number, t0: number, t1: number): number {
  return t0 + f * (t1 - t0);
}

/**
 * Overlay boxes for the segments intersecting the window, clipped to it.
 * A segment [1.0, 1.02] on a 0.5-1.5 s window yields left=0.5, width=0.02.
 */
export function overlayBoxes(segments: Segment[], t0: number, t1: number): OverlayBox[] {
  const boxes: OverlayBox[] = [];
  for (const seg of segments) {
    if (seg.end_s <= t0 || seg.start_s >= t1) continue;
    const left = Math.max(0, timeToFraction(seg.start_s, t0, t1));
    const right = Math.min(1, timeToFraction(seg.end_s, t0, t1));
    boxes.push({ segmentId: seg.id, label: seg.label, left, width: right - left });
  }
  return boxes;
}

/** Nearest segment boundary to a time point, for drag snapping. */
export function nearestBoundary(
  segments: Segment[],
  t: number
): { segmentId: number; edge: 'start' | 'end'; t: number } | null {
  let best: { segmentId: number; edge: 'start' | 'end'; t: number } | null = null;
  let bestDist = Infinity;
  for (const seg of segments) {
    for (const edge of ['start', 'end'] as const) {
      const bt = edge === 'start' ? seg.start_s : seg.end_s;
      const dist = Math.abs(bt - t);
      if (dist < bestDist) {
        bestDist = dist;
        best = { segmentId: seg.id, edge, t: bt };
      }
    }
  }
  return best;
}

/** Min/max amplitude per pixel column for waveform rendering. */
export function waveformPeaks(
  samples: Float32Array,
  columns: number
): { min: Float32Array; max: Float32Array } {
  const min = new Float32Array(columns);
  const max = new Float32Array(columns);
  if (samples.length === 0 || columns === 0) return { min, max };
  for (let c = 0; c < columns; c++) {
    const lo = Math.floor((c * samples.length) / columns);
    const hi = Math.max(lo + 1, Math.floor(((c + 1) * samples.length) / columns));
    let a = Infinity;
    let b = -Infinity;
    for (let i = lo; i < hi; i++) {
      const v = samples[i]!;
      if (v < a) a = v;
      if (v > b) b = v;
    }
    min[c] = a;
    max[c] = b;
  }
  return { min, max };
}
