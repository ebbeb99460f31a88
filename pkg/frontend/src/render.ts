/**
 * Canvas rendering of the three aligned layers: waveform, spectrogram
 * tile, and the colored segment overlay. All geometry comes from layout.ts
 * so the mapping is the same for every layer and for hit-testing.
 */

import { OverlayBox, overlayBoxes, waveformPeaks } from './layout.js';
import { Segment, SpectrogramTile } from './schema.js';

export const LABEL_COLORS: Record<string, string> = {
  SB: '#1f77b4',
  MB: '#ff7f0e',
  CRS: '#2ca02c',
  HS: '#d62728',
  None: '#9e9e9e',
};

export function drawWaveform(
  ctx: CanvasRenderingContext2D,
  samples: Float32Array,
  width: number,
  height: number
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#10131a';
  ctx.fillRect(0, 0, width, height);
  const { min, max } = waveformPeaks(samples, width);
  ctx.strokeStyle = '#7ab8f5';
  ctx.beginPath();
  const mid = height / 2;
  for (let x = 0; x < width; x++) {
    ctx.moveTo(x + 0.5, mid - (max[x] ?? 0) * mid);
    ctx.lineTo(x + 0.5, mid - (min[x] ?? 0) * mid);
  }
  ctx.stroke();
}

export function drawSpectrogram(
  ctx: CanvasRenderingContext2D,
  tile: SpectrogramTile,
  width: number,
  height: number
): void {
  ctx.clearRect(0, 0, width, height);
  const frames = tile.values_db.length;
  const bands = tile.bands.length;
  if (frames === 0 || bands === 0) return;
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of tile.values_db) {
    for (const v of row) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  const span = Math.max(1e-6, hi - lo);
  const colW = width / frames;
  const rowH = height / bands;
  for (let f = 0; f < frames; f++) {
    const row = tile.values_db[f]!;
    for (let b = 0; b < bands; b++) {
      const norm = (row[b]! - lo) / span;
      ctx.fillStyle = heat(norm);
      // band 0 at the bottom
      ctx.fillRect(f * colW, height - (b + 1) * rowH, colW + 0.5, rowH + 0.5);
    }
  }
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  segments: Segment[],
  t0: number,
  t1: number,
  width: number,
  height: number,
  selected: number[]
): OverlayBox[] {
  ctx.clearRect(0, 0, width, height);
  const boxes = overlayBoxes(segments, t0, t1);
  for (const box of boxes) {
    const x = box.left * width;
    const w = Math.max(1, box.width * width);
    ctx.fillStyle = LABEL_COLORS[box.label] ?? '#ffffff';
    ctx.globalAlpha = selected.includes(box.segmentId) ? 0.55 : 0.3;
    ctx.fillRect(x, 0, w, height);
    ctx.globalAlpha = 1.0;
    ctx.strokeStyle = LABEL_COLORS[box.label] ?? '#ffffff';
    ctx.strokeRect(x + 0.5, 0.5, w - 1, height - 1);
    if (w > 24) {
      ctx.fillStyle = '#ffffff';
      ctx.font = '11px sans-serif';
      ctx.fillText(box.label, x + 3, 13);
    }
  }
  return boxes;
}

function heat(v: number): string {
  const x = Math.max(0, Math.min(1, v));
  const r = Math.round(255 * Math.min(1, 2.5 * x));
  const g = Math.round(255 * Math.max(0, Math.min(1, 2.5 * x - 0.9)));
  const b = Math.round(90 + 120 * Math.max(0, 0.55 - x));
  return `rgb(${r},${g},${b})`;
}
