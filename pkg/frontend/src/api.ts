/**
 * HTTP client for the review service with optimistic-concurrency handling.
 *
 * Every mutation names the revision it was based on. A 409 means another
 * edit won the race (or the local state is stale): the client refetches
 * the authoritative session state and reports the conflict to the caller,
 * never retrying blindly.
 */

import {
  AdjustmentReport,
  adjustmentReportSchema,
  Edit,
  RecordingsList,
  recordingsSchema,
  SessionState,
  sessionSchema,
  SpectrogramTile,
  spectrogramTileSchema,
  validateEditRequest,
} from './schema.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly detail?: string
  ) {
    super(message);
  }
}

export class RevisionConflictError extends ApiError {
  constructor(
    detail: string,
    readonly latest: SessionState
  ) {
    super(`revision conflict: ${detail}`, 409, detail);
  }
}

async function parseJson(resp: Response): Promise<unknown> {
  try {
    return await resp.json();
  } catch {
    throw new ApiError('response was not JSON', resp.status);
  }
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const doc = (await resp.json()) as { detail?: string };
    return doc.detail ?? resp.statusText;
  } catch {
    return resp.statusText;
  }
}

export class ReviewApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init)
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, '')}${path}`;
  }

  private async get(path: string): Promise<unknown> {
    const resp = await this.fetchFn(this.url(path));
    if (!resp.ok) throw new ApiError(`GET ${path} failed`, resp.status, await errorDetail(resp));
    return parseJson(resp);
  }

  async health(): Promise<{ version: string }> {
    return (await this.get('/health')) as { version: string };
  }

  async recordings(): Promise<RecordingsList> {
    return recordingsSchema.parse(await this.get('/recordings'));
  }

  async createSession(recording: string, quadrant: string): Promise<SessionState> {
    const resp = await this.fetchFn(this.url('/sessions'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ v: 1, recording, quadrant }),
    });
    if (!resp.ok) {
      throw new ApiError('session creation failed', resp.status, await errorDetail(resp));
    }
    return sessionSchema.parse(await parseJson(resp));
  }

  async getSession(sessionId: string): Promise<SessionState> {
    return sessionSchema.parse(await this.get(`/sessions/${sessionId}`));
  }

  async spectrogram(sessionId: string, from: number, to: number): Promise<SpectrogramTile> {
    const query = `?from=${encodeURIComponent(from)}&to=${encodeURIComponent(to)}`;
    return spectrogramTileSchema.parse(await this.get(`/sessions/${sessionId}/spectrogram${query}`));
  }

  async audio(sessionId: string, from: number, to: number): Promise<ArrayBuffer> {
    const query = `?from=${encodeURIComponent(from)}&to=${encodeURIComponent(to)}`;
    const resp = await this.fetchFn(this.url(`/sessions/${sessionId}/audio${query}`));
    if (!resp.ok) throw new ApiError('audio fetch failed', resp.status, await errorDetail(resp));
    return resp.arrayBuffer();
  }

  /**
   * Apply one edit based on the given revision. Validates the payload
   * against the wire schema before sending. On 409 the latest session
   * state is fetched and wrapped into a RevisionConflictError.
   */
  async postEdit(sessionId: string, revision: number, edit: Edit): Promise<SessionState> {
    const payload = validateEditRequest({ v: 1, revision, edit });
    const resp = await this.fetchFn(this.url(`/sessions/${sessionId}/edits`), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (resp.status === 409) {
      const detail = await errorDetail(resp);
      const latest = await this.getSession(sessionId);
      throw new RevisionConflictError(detail, latest);
    }
    if (!resp.ok) {
      throw new ApiError('edit rejected', resp.status, await errorDetail(resp));
    }
    return sessionSchema.parse(await parseJson(resp));
  }

  async finish(sessionId: string, manualBaselineS?: number): Promise<AdjustmentReport> {
    const resp = await this.fetchFn(this.url(`/sessions/${sessionId}/finish`), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(manualBaselineS === undefined ? {} : { manual_baseline_s: manualBaselineS }),
    });
    if (!resp.ok) throw new ApiError('finish failed', resp.status, await errorDetail(resp));
    return adjustmentReportSchema.parse(await parseJson(resp));
  }
}
