/** Ingest-service client: session lifecycle plus batched, retrying upload. */

import type { FrameJson, SessionLabels } from "./types";

export const MAX_BATCH_SIZE = 64;

export interface SyncResult {
  sessionId: string;
  /** Frames the server has confirmed holding (counting replays as held). */
  confirmed: number;
  frameCount: number;
  durationS: number;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly field: string | null = null,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let message = `${response.status}`;
  let field: string | null = null;
  try {
    const body = (await response.json()) as { error?: string; field?: string };
    if (body.error) message = body.error;
    field = body.field ?? null;
  } catch {
    // non-JSON error body; status alone will do
  }
  return new ApiError(message, response.status, field);
}

export class IngestClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async post(path: string, body: unknown): Promise<Response> {
    return this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/api/v1/health`);
      return resp.ok;
    } catch {
      return false;
    }
  }

  async createSession(labels: SessionLabels): Promise<string> {
    const resp = await this.post("/api/v1/sessions", {
      respondent: labels.respondent,
      motion_type: labels.motion,
      side: labels.side,
    });
    if (resp.status !== 201) throw await parseError(resp);
    const body = (await resp.json()) as { session_id: string };
    return body.session_id;
  }

  async appendBatch(sessionId: string, batchSeq: number, frames: FrameJson[]): Promise<number> {
    const resp = await this.post(`/api/v1/sessions/${sessionId}/frames`, {
      batch_seq: batchSeq,
      frames,
    });
    if (resp.status !== 202) throw await parseError(resp);
    const body = (await resp.json()) as { accepted: number };
    return body.accepted;
  }

  async finishSession(sessionId: string): Promise<{ frame_count: number; duration_s: number }> {
    const resp = await this.post(`/api/v1/sessions/${sessionId}/finish`, {});
    if (resp.status !== 200) throw await parseError(resp);
    return (await resp.json()) as { frame_count: number; duration_s: number };
  }
}

export interface SyncOptions {
  batchSize?: number;
  retries?: number;
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onProgress?: (confirmed: number, total: number) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Upload a full buffer as one session.
 *
 * Batches carry monotone sequence numbers, so retrying after a lost
 * acknowledgement can never duplicate frames: the server replies
 * accepted=0 for a replay but still holds the batch.
 */
export async function syncBuffer(
  client: IngestClient,
  labels: SessionLabels,
  frames: FrameJson[],
  options: SyncOptions = {},
): Promise<SyncResult> {
  const batchSize = Math.min(options.batchSize ?? MAX_BATCH_SIZE, MAX_BATCH_SIZE);
  const retries = options.retries ?? 3;
  const backoffMs = options.backoffMs ?? 300;
  const sleep = options.sleep ?? defaultSleep;

  if (frames.length === 0) throw new Error("nothing to sync");

  const sessionId = await client.createSession(labels);
  let confirmed = 0;
  let batchSeq = 0;
  for (let start = 0; start < frames.length; start += batchSize) {
    const batch = frames.slice(start, start + batchSize);
    let attempt = 0;
    for (;;) {
      try {
        await client.appendBatch(sessionId, batchSeq, batch);
        break;
      } catch (err) {
        if (err instanceof ApiError && err.status >= 400 && err.status < 500) {
          throw err; // validation problem; retrying cannot help
        }
        attempt += 1;
        if (attempt > retries) throw err;
        await sleep(backoffMs * attempt);
      }
    }
    confirmed += batch.length;
    batchSeq += 1;
    options.onProgress?.(confirmed, frames.length);
  }
  const summary = await client.finishSession(sessionId);
  return {
    sessionId,
    confirmed,
    frameCount: summary.frame_count,
    durationS: summary.duration_s,
  };
}
