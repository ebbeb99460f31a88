/**
 * Browser entry point: wires the API client, state reducer, gesture
 * mapping, and canvas layers together. Playback uses the browser's
 * AudioContext on the served WAV slices; no audio analysis happens here,
 * the service is the single source of truth for features.
 */

import { ReviewApi, RevisionConflictError } from './api.js';
import { dragToEdit, keyToEdit } from './gestures.js';
import { fractionToTime, nearestBoundary } from './layout.js';
import { Edit } from './schema.js';
import { drawOverlay, drawSpectrogram, drawWaveform } from './render.js';
import { Action, initialState, reduce, visibleSegments, ViewState } from './state.js';
import { decodeWav } from './wave.js';

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

class App {
  private state: ViewState = initialState();
  private api = new ReviewApi('');
  private cursorT = 0;
  private drag: { segmentId: number; edge: 'start' | 'end' } | null = null;
  private audioCtx: AudioContext | null = null;

  private waveCanvas = $('wave') as unknown as HTMLCanvasElement;
  private specCanvas = $('spec') as unknown as HTMLCanvasElement;
  private overlayCanvas = $('overlay') as unknown as HTMLCanvasElement;
  private status = $('status');

  async start(): Promise<void> {
    const recordings = await this.api.recordings();
    const picker = $('recording') as unknown as HTMLSelectElement;
    for (const rec of recordings.recordings) {
      for (const channel of rec.channels) {
        const option = document.createElement('option');
        option.value = `${rec.name}|${channel}`;
        option.textContent = `${rec.name} / ${channel}`;
        picker.appendChild(option);
      }
    }
    $('open').addEventListener('click', () => void this.openSession(picker.value));
    $('finish').addEventListener('click', () => void this.finishSession());
    window.addEventListener('keydown', (ev) => void this.onKey(ev));
    this.overlayCanvas.addEventListener('mousedown', (ev) => this.onMouseDown(ev));
    this.overlayCanvas.addEventListener('mousemove', (ev) => this.onMouseMove(ev));
    this.overlayCanvas.addEventListener('mouseup', (ev) => void this.onMouseUp(ev));
    this.render();
  }

  private dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    this.render();
  }

  private async openSession(choice: string): Promise<void> {
    const [recording, quadrant] = choice.split('|');
    if (!recording || !quadrant) return;
    const session = await this.api.createSession(recording, quadrant);
    this.dispatch({ kind: 'session-loaded', session });
    await this.refreshMedia();
  }

  private async refreshMedia(): Promise<void> {
    const { session, t0, t1 } = this.state;
    if (!session) return;
    try {
      const tile = await this.api.spectrogram(session.session_id, t0, t1);
      this.dispatch({ kind: 'tile-loaded', tile });
    } catch (err) {
      this.dispatch({ kind: 'tile-failed', message: String(err) });
    }
    try {
      const wav = decodeWav(await this.api.audio(session.session_id, t0, t1));
      drawWaveform(
        this.waveCanvas.getContext('2d')!,
        wav.samples,
        this.waveCanvas.width,
        this.waveCanvas.height
      );
    } catch {
      // waveform stays blank; overlay correctness does not depend on it
    }
  }

  private async sendEdit(edit: Edit): Promise<void> {
    const { session, pending } = this.state;
    if (!session || pending || session.finished) return;
    this.dispatch({ kind: 'edit-started' });
    try {
      const updated = await this.api.postEdit(session.session_id, session.revision, edit);
      this.dispatch({ kind: 'edit-acknowledged', session: updated });
    } catch (err) {
      if (err instanceof RevisionConflictError) {
        this.dispatch({
          kind: 'edit-rejected',
          authoritative: err.latest,
          message: `conflict: ${err.detail}; view refreshed`,
        });
      } else {
        this.dispatch({ kind: 'edit-rejected', authoritative: null, message: String(err) });
      }
    }
  }

  private async onKey(ev: KeyboardEvent): Promise<void> {
    if (ev.key === ' ') {
      ev.preventDefault();
      await this.play();
      return;
    }
    const edit = keyToEdit(ev.key, {
      selected: this.state.selected,
      segments: this.state.session?.working_track ?? [],
      cursorT: this.cursorT,
    });
    if (edit) await this.sendEdit(edit);
  }

  private canvasTime(ev: MouseEvent): number {
    const rect = this.overlayCanvas.getBoundingClientRect();
    const f = (ev.clientX - rect.left) / rect.width;
    return fractionToTime(f, this.state.t0, this.state.t1);
  }

  private onMouseDown(ev: MouseEvent): void {
    const t = this.canvasTime(ev);
    this.cursorT = t;
    const segments = visibleSegments(this.state);
    const boundary = nearestBoundary(segments, t);
    const pxTolerance = ((this.state.t1 - this.state.t0) / this.overlayCanvas.width) * 5;
    if (boundary && Math.abs(boundary.t - t) <= pxTolerance) {
      this.drag = { segmentId: boundary.segmentId, edge: boundary.edge };
      return;
    }
    const hit = segments.find((s) => s.start_s <= t && t < s.end_s);
    if (hit) this.dispatch({ kind: 'select', segmentId: hit.id, additive: ev.shiftKey });
  }

  private onMouseMove(ev: MouseEvent): void {
    this.cursorT = this.canvasTime(ev);
  }

  private async onMouseUp(ev: MouseEvent): Promise<void> {
    if (!this.drag) return;
    const drag = this.drag;
    this.drag = null;
    const edit = dragToEdit(
      { segmentId: drag.segmentId, edge: drag.edge, t: this.canvasTime(ev) },
      this.state.session?.working_track ?? []
    );
    if (edit) await this.sendEdit(edit);
  }

  private async play(): Promise<void> {
    const { session, t0, t1 } = this.state;
    if (!session) return;
    const bytes = await this.api.audio(session.session_id, t0, t1);
    this.audioCtx = this.audioCtx ?? new AudioContext();
    const decoded = await this.audioCtx.decodeAudioData(bytes);
    const source = this.audioCtx.createBufferSource();
    source.buffer = decoded;
    source.connect(this.audioCtx.destination);
    source.start();
  }

  private render(): void {
    const { session, tile, tileError, pending, notice, t0, t1, selected } = this.state;
    if (tile) {
      drawSpectrogram(
        this.specCanvas.getContext('2d')!,
        tile,
        this.specCanvas.width,
        this.specCanvas.height
      );
    } else {
      const ctx = this.specCanvas.getContext('2d')!;
      ctx.clearRect(0, 0, this.specCanvas.width, this.specCanvas.height);
    }
    drawOverlay(
      this.overlayCanvas.getContext('2d')!,
      visibleSegments(this.state),
      t0,
      t1,
      this.overlayCanvas.width,
      this.overlayCanvas.height,
      selected
    );
    const parts: string[] = [];
    if (session) {
      parts.push(`${session.recording}/${session.quadrant} rev ${session.revision}`);
      parts.push(`${session.working_track.length} segments`);
      const events = session.working_track.filter((s) => s.label !== 'None').length;
      const autoEvents = session.auto_track.filter((s) => s.label !== 'None').length;
      parts.push(`events ${events} (auto ${autoEvents})`);
    }
    if (pending) parts.push('saving…');
    if (tileError) parts.push(`tile error: ${tileError}`);
    if (notice) parts.push(notice);
    this.status.textContent = parts.join('  ·  ');
  }

  private async finishSession(): Promise<void> {
    const { session } = this.state;
    if (!session || this.state.pending) return;
    const report = await this.api.finish(session.session_id);
    this.status.textContent =
      `finished: ${report.pct_removed_or_merged.toFixed(1)}% removed or merged, ` +
      `review ${(report.review_time_s ?? 0).toFixed(0)}s`;
  }
}

window.addEventListener('DOMContentLoaded', () => {
  void new App().start();
});
