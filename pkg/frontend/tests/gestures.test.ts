import { describe, expect, it } from 'vitest';

import { dragToEdit, insertToEdit, keyToEdit } from '../src/gestures.js';
import { editSchema, Segment } from '../src/schema.js';

const segments: Segment[] = [
  { id: 0, start_s: 0.0, end_s: 1.0, label: 'SB' },
  { id: 1, start_s: 1.5, end_s: 2.0, label: 'SB' },
  { id: 2, start_s: 3.0, end_s: 4.0, label: 'MB' },
];

const ctx = (selected: number[], cursorT = 0.5) => ({ selected, segments, cursorT });

describe('keyboard gestures', () => {
  it('keys 1-4 relabel the selected segment to SB/MB/CRS/HS', () => {
    const expected = { '1': 'SB', '2': 'MB', '3': 'CRS', '4': 'HS' } as const;
    for (const [key, label] of Object.entries(expected)) {
      const edit = keyToEdit(key, ctx([2]));
      expect(edit).toEqual({ op: 'relabel', segment_id: 2, label });
      expect(editSchema.parse(edit).op).toBe('relabel');
    }
  });

  it('relabel without a selection does nothing', () => {
    expect(keyToEdit('1', ctx([]))).toBeNull();
  });

  it('delete key maps to a delete edit', () => {
    expect(keyToEdit('Delete', ctx([1]))).toEqual({ op: 'delete', segment_id: 1 });
    expect(keyToEdit('x', ctx([1]))).toEqual({ op: 'delete', segment_id: 1 });
  });

  it('M merges two selected same-label segments in time order', () => {
    const edit = keyToEdit('m', ctx([1, 0]));
    expect(edit).toEqual({ op: 'merge', segment_ids: [0, 1] });
  });

  it('merge refuses mixed labels or single selection', () => {
    expect(keyToEdit('m', ctx([0, 2]))).toBeNull();
    expect(keyToEdit('m', ctx([0]))).toBeNull();
  });

  it('S splits the selected segment at the cursor', () => {
    expect(keyToEdit('s', ctx([0], 0.25))).toEqual({ op: 'split', segment_id: 0, t: 0.25 });
    // cursor outside the segment: no edit
    expect(keyToEdit('s', ctx([0], 2.5))).toBeNull();
  });

  it('unknown keys map to nothing', () => {
    expect(keyToEdit('q', ctx([0]))).toBeNull();
  });
});

describe('drag gestures', () => {
  it('dragging a right boundary +100 ms makes a move-boundary payload', () => {
    const edit = dragToEdit({ segmentId: 0, edge: 'end', t: 1.1 }, segments);
    expect(edit).toEqual({ op: 'move-boundary', segment_id: 0, edge: 'end', t: 1.1 });
  });

  it('degenerate drags are refused locally', () => {
    expect(dragToEdit({ segmentId: 0, edge: 'end', t: 0.0 }, segments)).toBeNull();
    expect(dragToEdit({ segmentId: 0, edge: 'start', t: 1.2 }, segments)).toBeNull();
    expect(dragToEdit({ segmentId: 99, edge: 'end', t: 1.2 }, segments)).toBeNull();
  });

  it('payload times land on the microsecond grid', () => {
    const edit = dragToEdit({ segmentId: 0, edge: 'end', t: 1.10000049 }, segments);
    expect(edit).toEqual({ op: 'move-boundary', segment_id: 0, edge: 'end', t: 1.1 });
  });

  it('insert drags normalize their direction', () => {
    expect(insertToEdit({ startT: 2.5, endT: 2.2, label: 'SB' })).toEqual({
      op: 'insert',
      start_s: 2.2,
      end_s: 2.5,
      label: 'SB',
    });
    expect(insertToEdit({ startT: 2.2, endT: 2.2, label: 'SB' })).toBeNull();
  });

  it('every produced gesture payload validates against the wire schema', () => {
    const edits = [
      keyToEdit('2', ctx([0])),
      keyToEdit('x', ctx([1])),
      keyToEdit('m', ctx([0, 1])),
      keyToEdit('s', ctx([0], 0.4)),
      dragToEdit({ segmentId: 2, edge: 'start', t: 3.2 }, segments),
      insertToEdit({ startT: 5.0, endT: 5.2, label: 'CRS' }),
    ];
    for (const edit of edits) {
      expect(edit).not.toBeNull();
      expect(() => editSchema.parse(edit)).not.toThrow();
    }
  });
});
