/**
 * Wire schemas for the review service. Every payload carries a schema
 * version field "v"; edits are validated locally before they are sent so
 * the service never sees a malformed request from this client.
 */

import { z } from 'zod';

export const PATTERN_LABELS = ['SB', 'MB', 'CRS', 'HS', 'None'] as const;
export const EVENT_LABELS = ['SB', 'MB', 'CRS', 'HS'] as const;

export const labelSchema = z.enum(PATTERN_LABELS);
export type PatternLabel = z.infer<typeof labelSchema>;

export const segmentSchema = z
  .object({
    id: z.number().int().nonnegative(),
    start_s: z.number().nonnegative(),
    end_s: z.number(),
    label: labelSchema,
  })
  .refine((s) => s.end_s > s.start_s, { message: 'segment end must exceed start' });
export type Segment = z.infer<typeof segmentSchema>;

export const sessionSchema = z.object({
  v: z.literal(1),
  session_id: z.string().min(1),
  recording: z.string(),
  quadrant: z.string(),
  duration_s: z.number().positive(),
  sample_rate: z.number().int().positive(),
  revision: z.number().int().nonnegative(),
  finished: z.boolean(),
  auto_track: z.array(segmentSchema),
  working_track: z.array(segmentSchema),
  edit_count: z.number().int().nonnegative(),
});
export type SessionState = z.infer<typeof sessionSchema>;

export const spectrogramTileSchema = z.object({
  v: z.literal(1),
  times: z.array(z.number()),
  bands: z.array(z.number()),
  values_db: z.array(z.array(z.number())),
});
export type SpectrogramTile = z.infer<typeof spectrogramTileSchema>;

export const recordingsSchema = z.object({
  v: z.literal(1),
  recordings: z.array(
    z.object({
      name: z.string(),
      channels: z.array(z.string()),
      sample_rate: z.number().int().positive(),
      duration_s: z.number().positive(),
    })
  ),
});
export type RecordingsList = z.infer<typeof recordingsSchema>;

export const adjustmentReportSchema = z.object({
  v: z.literal(1),
  per_label: z.record(
    z.object({
      auto_count: z.number(),
      expert_count: z.number(),
      mean_dur_auto_s: z.number().nullable(),
      mean_dur_expert_s: z.number().nullable(),
    })
  ),
  pct_removed_or_merged: z.number(),
  review_time_s: z.number().nullable(),
});
export type AdjustmentReport = z.infer<typeof adjustmentReportSchema>;

// ---------------------------------------------------------------------------
// edits

export const editSchema = z.discriminatedUnion('op', [
  z.object({
    op: z.literal('relabel'),
    segment_id: z.number().int().nonnegative(),
    label: z.enum(EVENT_LABELS),
  }),
  z.object({
    op: z.literal('move-boundary'),
    segment_id: z.number().int().nonnegative(),
    edge: z.enum(['start', 'end']),
    t: z.number().nonnegative(),
  }),
  z.object({
    op: z.literal('split'),
    segment_id: z.number().int().nonnegative(),
    t: z.number().nonnegative(),
  }),
  z.object({
    op: z.literal('merge'),
    segment_ids: z.array(z.number().int().nonnegative()).min(2),
  }),
  z.object({
    op: z.literal('delete'),
    segment_id: z.number().int().nonnegative(),
  }),
  z.object({
    op: z.literal('insert'),
    start_s: z.number().nonnegative(),
    end_s: z.number(),
    label: labelSchema,
  }),
]);
export type Edit = z.infer<typeof editSchema>;

export const editRequestSchema = z.object({
  v: z.literal(1),
  revision: z.number().int().nonnegative(),
  edit: editSchema,
});
export type EditRequest = z.infer<typeof editRequestSchema>;

/** Validate an outgoing edit request; throws with a readable message. */
export function validateEditRequest(payload: unknown): EditRequest {
  const result = editRequestSchema.safeParse(payload);
  if (!result.success) {
    throw new Error(`invalid edit request: ${result.error.issues[0]?.message ?? 'unknown'}`);
  }
  return result.data;
}
