/**
 * Editor view state: visible window, selection, pending mutation gate.
 *
 * The invariants the reducer enforces:
 *   - at most one mutation in flight; gestures are ignored while pending;
 *   - after settling, the displayed track always equals the last
 *     server-acknowledged state (acknowledged edits replace the track,
 *     rejections and conflicts roll back to the authoritative state);
 *   - a failed tile fetch clears the overlay rather than showing stale data.
 */

import { Segment, SessionState, SpectrogramTile } from './schema.js';

export interface ViewState {
  session: SessionState | null;
  /** visible window [t0, t1], always within recording bounds, t0 < t1 */
  t0: number;
  t1: number;
  selected: number[]; // selected segment ids, in selection order
  pending: boolean; // a mutation is in flight; edits disabled
  tile: SpectrogramTile | null;
  tileError: string | null;
  notice: string | null; // user-visible message (conflicts, rejections)
}

export function initialState(): ViewState {
  return {
    session: null,
    t0: 0,
    t1: 1,
    selected: [],
    pending: false,
    tile: null,
    tileError: null,
    notice: null,
  };
}

export type Action =
  | { kind: 'session-loaded'; session: SessionState }
  | { kind: 'window'; t0: number; t1: number }
  | { kind: 'select'; segmentId: number; additive: boolean }
  | { kind: 'clear-selection' }
  | { kind: 'edit-started' }
  | { kind: 'edit-acknowledged'; session: SessionState }
  | { kind: 'edit-rejected'; authoritative: SessionState | null; message: string }
  | { kind: 'tile-loaded'; tile: SpectrogramTile }
  | { kind: 'tile-failed'; message: string }
  | { kind: 'dismiss-notice' };

export function clampWindow(t0: number, t1: number, duration: number): [number, number] {
  const lo = Math.max(0, Math.min(t0, duration));
  const hi = Math.max(0, Math.min(t1, duration));
  if (hi > lo) return [lo, hi];
  // degenerate request: fall back to the full recording
  return [0, duration];
}

export function reduce(state: ViewState, action: Action): ViewState {
  switch (action.kind) {
    case 'session-loaded': {
      const duration = action.session.duration_s;
      return {
        ...state,
        session: action.session,
        t0: 0,
        t1: duration,
        selected: [],
        pending: false,
      };
    }
    case 'window': {
      if (!state.session) return state;
      const [t0, t1] = clampWindow(action.t0, action.t1, state.session.duration_s);
      return { ...state, t0, t1 };
    }
    case 'select': {
      if (state.pending) return state;
      const selected = action.additive
        ? state.selected.includes(action.segmentId)
          ? state.selected
          : [...state.selected, action.segmentId]
        : [action.segmentId];
      return { ...state, selected };
    }
    case 'clear-selection':
      return { ...state, selected: [] };
    case 'edit-started':
      return state.pending ? state : { ...state, pending: true, notice: null };
    case 'edit-acknowledged':
      return {
        ...state,
        session: action.session,
        pending: false,
        selected: state.selected.filter((id) =>
          action.session.working_track.some((s) => s.id === id)
        ),
      };
    case 'edit-rejected': {
      // roll back to the authoritative server state (conflicts carry it)
      const session = action.authoritative ?? state.session;
      return {
        ...state,
        session,
        pending: false,
        selected: [],
        notice: action.message,
      };
    }
    case 'tile-loaded':
      return { ...state, tile: action.tile, tileError: null };
    case 'tile-failed':
      // never keep a stale overlay on top of a failed fetch
      return { ...state, tile: null, tileError: action.message };
    case 'dismiss-notice':
      return { ...state, notice: null };
  }
}

/** Segments of the working track visible in the current window. */
export function visibleSegments(state: ViewState): Segment[] {
  if (!state.session) return [];
  return state.session.working_track.filter((s) => s.end_s > state.t0 && s.start_s < state.t1);
}
