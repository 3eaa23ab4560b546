import { writeFile } from 'node:fs/promises';

import {
  Exchange,
  Observation,
  ResetResponse,
  StepResponse,
  Task,
  WireMessage,
  gatewayErrorSchema,
  resetResponseSchema,
  stepResponseSchema,
} from './types.js';

export interface ClientOptions {
  baseUrl: string;
  /** retry budget for reset (resets are idempotent; steps are never retried) */
  resetRetries?: number;
  retryBaseMs?: number;
  timeoutMs?: number;
}

export class GatewayError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status?: number,
  ) {
    super(message);
    this.name = 'GatewayError';
  }
}

export class TransportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'TransportError';
  }
}

export class SessionStateError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'SessionStateError';
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/**
 * One episode per session: reset() opens it, step() advances it until done.
 * Every exchange lands in the transcript, which serializes to JSONL.
 */
export class ClientSession {
  readonly transcript: Exchange[] = [];
  private _episodeId?: string;
  private _lastObservation?: Observation;
  private _done = false;

  constructor(private readonly opts: ClientOptions) {}

  get episodeId(): string | undefined {
    return this._episodeId;
  }

  get lastObservation(): Observation | undefined {
    return this._lastObservation;
  }

  get done(): boolean {
    return this._done;
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    const { timeoutMs = 30_000 } = this.opts;
    let response: Response;
    try {
      response = await fetch(this.opts.baseUrl + path, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(body),
        signal: AbortSignal.timeout(timeoutMs),
      });
    } catch (err) {
      throw new TransportError(`POST ${path} failed: ${err}`);
    }
    const payload = await response.json().catch(() => undefined);
    if (!response.ok) {
      const parsed = gatewayErrorSchema.safeParse(payload);
      if (parsed.success) {
        throw new GatewayError(parsed.data.error.code, parsed.data.error.message, response.status);
      }
      throw new GatewayError('http-error', `HTTP ${response.status}`, response.status);
    }
    return payload;
  }

  /**
   * Start a new episode. Transport failures are retried with backoff
   * (resets are idempotent on the server: each attempt just opens a session).
   */
  async reset(
    task: Task | string,
    seed: number,
    overrides?: Record<string, unknown>,
  ): Promise<Observation> {
    const request: Record<string, unknown> = { seed };
    if (typeof task === 'string') request.task_id = task;
    else request.task = task;
    if (overrides) request.overrides = overrides;

    const { resetRetries = 3, retryBaseMs = 200 } = this.opts;
    let lastError: unknown;
    for (let attempt = 0; attempt <= resetRetries; attempt++) {
      try {
        const payload = resetResponseSchema.parse(await this.post('/env/reset', request));
        this._episodeId = payload.episode_id;
        this._lastObservation = payload.observation;
        this._done = false;
        this.transcript.push({ kind: 'reset', request, response: payload as ResetResponse });
        return payload.observation;
      } catch (err) {
        if (!(err instanceof TransportError)) throw err;
        lastError = err;
        if (attempt < resetRetries) await sleep(retryBaseMs * 2 ** attempt);
      }
    }
    throw new TransportError(`reset failed after ${resetRetries + 1} attempts: ${lastError}`);
  }

  /**
   * Apply one router action. Never retried: a step is not idempotent, so a
   * transport failure surfaces immediately and leaves the session usable
   * only for inspection.
   */
  async step(action: WireMessage): Promise<StepResponse> {
    if (this._episodeId === undefined) {
      throw new SessionStateError('step() before reset()');
    }
    if (this._done) {
      throw new SessionStateError('step() on a finished episode');
    }
    const request = { episode_id: this._episodeId, action };
    const payload = stepResponseSchema.parse(await this.post('/env/step', request));
    this._done = payload.done;
    if (!payload.done) this._lastObservation = payload.observation;
    this.transcript.push({ kind: 'step', request, response: payload });
    return payload;
  }

  transcriptJsonl(): string {
    return this.transcript.map((exchange) => JSON.stringify(exchange)).join('\n') + '\n';
  }

  async saveTranscript(path: string): Promise<void> {
    await writeFile(path, this.transcriptJsonl(), 'utf-8');
  }
}
