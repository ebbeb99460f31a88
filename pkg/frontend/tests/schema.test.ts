/**
 * Contract tests: recorded responses from the review service must parse
 * under the client schemas, and locally built edit payloads must validate
 * before they are allowed on the wire.
 */

import { readFileSync } from 'node:fs';
import { describe, expect, it } from 'vitest';

import {
  adjustmentReportSchema,
  editSchema,
  recordingsSchema,
  sessionSchema,
  spectrogramTileSchema,
  validateEditRequest,
} from '../src/schema.js';

const fixture = (name: string): unknown =>
  JSON.parse(readFileSync(new URL(`../fixtures/${name}`, import.meta.url), 'utf-8'));

describe('recorded service responses', () => {
  it('session payload parses', () => {
    const session = sessionSchema.parse(fixture('session.json'));
    expect(session.revision).toBe(0);
    expect(session.auto_track.length).toBeGreaterThan(0);
    expect(session.auto_track).toEqual(session.working_track);
  });

  it('edit acknowledgement parses and bumps revision', () => {
    const ack = sessionSchema.parse(fixture('edit_ack.json'));
    expect(ack.revision).toBe(1);
    expect(ack.edit_count).toBe(1);
  });

  it('conflict response carries a 409 with detail', () => {
    const conflict = fixture('edit_conflict.json') as { status: number; body: { detail: string } };
    expect(conflict.status).toBe(409);
    expect(conflict.body.detail).toMatch(/stale revision/);
  });

  it('recordings listing parses', () => {
    const listing = recordingsSchema.parse(fixture('recordings.json'));
    expect(listing.recordings[0]?.channels).toContain('RUQ');
  });

  it('spectrogram tile parses with aligned dimensions', () => {
    const tile = spectrogramTileSchema.parse(fixture('spectrogram.json'));
    expect(tile.bands.length).toBe(128);
    expect(tile.values_db.length).toBe(tile.times.length);
    expect(tile.values_db[0]?.length).toBe(tile.bands.length);
  });

  it('finish report parses', () => {
    const report = adjustmentReportSchema.parse(fixture('finish_report.json'));
    expect(report.pct_removed_or_merged).toBeGreaterThanOrEqual(0);
    expect(Object.keys(report.per_label)).toContain('SB');
  });
});

describe('edit payload validation', () => {
  it('accepts every edit kind', () => {
    const edits = [
      { op: 'relabel', segment_id: 1, label: 'MB' },
      { op: 'move-boundary', segment_id: 1, edge: 'end', t: 1.5 },
      { op: 'split', segment_id: 1, t: 0.75 },
      { op: 'merge', segment_ids: [1, 2] },
      { op: 'delete', segment_id: 1 },
      { op: 'insert', start_s: 0.5, end_s: 0.6, label: 'SB' },
    ];
    for (const edit of edits) {
      expect(editSchema.parse(edit).op).toBe(edit.op);
      expect(validateEditRequest({ v: 1, revision: 0, edit }).revision).toBe(0);
    }
  });

  it('rejects malformed edits before they reach the wire', () => {
    expect(() => validateEditRequest({ v: 1, revision: 0, edit: { op: 'relabel' } })).toThrow();
    expect(() =>
      validateEditRequest({ v: 1, revision: 0, edit: { op: 'merge', segment_ids: [1] } })
    ).toThrow();
    expect(() =>
      validateEditRequest({ v: 1, revision: 0, edit: { op: 'relabel', segment_id: 1, label: 'XX' } })
    ).toThrow();
    expect(() =>
      validateEditRequest({ v: 1, edit: { op: 'delete', segment_id: 1 } })
    ).toThrow();
  });
});
