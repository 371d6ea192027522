/**
 * Typed client for the holdout-meter gateway.
 *
 * Every number the dashboard shows comes from these responses; the client
 * never computes statistics of its own. Counts arrive as decimal strings
 * (they can exceed 2^53) and are kept as strings end to end.
 */

export type Mode = 'regular' | 'incremental';
export type SessionState = 'active' | 'exhausted' | 'closed';

export interface SignalReport {
  mode: Mode;
  step: number;
  signal: number | null;
  incremental_signal: number;
  band: [number, number] | null;
  epsilon_bound: number | null;
  delta: number;
  empirical_overfitting: number | null;
  remaining_submissions: number;
  remaining_reverts: number;
  interval: [number, number] | null;
  state: SessionState;
}

export interface PlanCounts {
  variant: string;
  per_signal: string[];
  total: string;
}

export interface PlanReport {
  required_size: number;
  counts: PlanCounts;
  epsilons: number[];
  delta: number;
  log_survival_at_n: number;
  baselines: { resampling: number; independent: number; single_use: number };
}

export interface MeterSpecPayload {
  mode: Mode;
  epsilons: number[];
  delta: number;
  T: number;
  bands?: [number, number][];
  tenancy?: number[];
  revert_budget?: number;
  revert_steps?: number[];
  conservative_multitenant?: boolean;
}

export interface SessionSummary {
  id: string;
  state: SessionState;
  mode: Mode;
  m: number;
  T: number;
  required_size: number;
  val_ref: string;
  test_ref: string;
  high_water: number;
  remaining_submissions: number;
  remaining_reverts: number;
  tenant_cursor: number;
  tenant_used: number;
  tenancy: number[];
  submissions: number;
  rotations: number;
  seq: number;
}

export interface BandView {
  lower: number;
  upper: number;
  epsilon: number;
}

export interface TimelineEntry {
  step: number;
  signal: number | null;
  incremental_signal: number;
  empirical_overfitting: number | null;
  digest: string;
  timestamp: string;
}

export interface MeterView {
  session: SessionSummary;
  bands: BandView[];
  report: SignalReport;
  timeline: TimelineEntry[];
  seq: number;
}

export class GatewayError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = 'GatewayError';
  }
}

/** Optimistic-concurrency conflicts prompt a refresh instead of an alert. */
export function isStaleView(err: unknown): boolean {
  return err instanceof GatewayError && err.code === 'sequence_conflict';
}

interface RequestOptions {
  idempotencyKey?: string;
  ifMatchSeq?: number;
}

export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    readonly token: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private headers(opts: RequestOptions = {}, contentType?: string): Record<string, string> {
    const h: Record<string, string> = { Authorization: `Bearer ${this.token}` };
    if (contentType) h['Content-Type'] = contentType;
    if (opts.idempotencyKey) h['Idempotency-Key'] = opts.idempotencyKey;
    if (opts.ifMatchSeq !== undefined) h['If-Match-Seq'] = String(opts.ifMatchSeq);
    return h;
  }

  private async handle<T>(resp: Response): Promise<T> {
    const text = await resp.text();
    let body: unknown;
    try {
      body = text ? JSON.parse(text) : {};
    } catch {
      throw new GatewayError('bad_response', `unparseable response (${resp.status})`, resp.status);
    }
    if (!resp.ok) {
      const err = (body as { error?: { code?: string; message?: string } }).error ?? {};
      const { code = 'error', message = resp.statusText, ...details } = err;
      throw new GatewayError(code, message, resp.status, details as Record<string, unknown>);
    }
    return body as T;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, { headers: this.headers() });
    return this.handle<T>(resp);
  }

  private async postJson<T>(path: string, payload: unknown, opts: RequestOptions = {}): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: this.headers(opts, 'application/json'),
      body: JSON.stringify(payload),
    });
    return this.handle<T>(resp);
  }

  private async postText<T>(path: string, body: string, opts: RequestOptions = {}): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: this.headers(opts, 'application/jsonl'),
      body,
    });
    return this.handle<T>(resp);
  }

  plan(spec: MeterSpecPayload): Promise<{ plan: PlanReport; spec: MeterSpecPayload }> {
    return this.postJson('/plans', spec);
  }

  registerDataset(
    records: string,
    sealed: boolean,
    datasetId?: string,
  ): Promise<{ dataset_id: string; size: number; sealed: boolean }> {
    const params = new URLSearchParams({ sealed: String(sealed) });
    if (datasetId) params.set('dataset_id', datasetId);
    return this.postText(`/datasets?${params}`, records);
  }

  createSession(
    spec: MeterSpecPayload,
    valRef: string,
    testRef: string,
    sessionId?: string,
  ): Promise<{ session: SessionSummary; seq: number }> {
    return this.postJson('/sessions', {
      spec,
      val_ref: valRef,
      test_ref: testRef,
      session_id: sessionId,
    });
  }

  submit(
    sessionId: string,
    predictionsJsonl: string,
    opts: RequestOptions = {},
  ): Promise<{ report: SignalReport; seq: number }> {
    return this.postText(`/sessions/${sessionId}/submissions`, predictionsJsonl, opts);
  }

  revert(sessionId: string, opts: RequestOptions = {}): Promise<{ report: SignalReport; seq: number }> {
    return this.postJson(`/sessions/${sessionId}/revert`, {}, opts);
  }

  handoff(sessionId: string, opts: RequestOptions = {}): Promise<{ session: SessionSummary; seq: number }> {
    return this.postJson(`/sessions/${sessionId}/handoff`, {}, opts);
  }

  rotate(
    sessionId: string,
    newTestRef: string,
    opts: RequestOptions = {},
  ): Promise<{ session: SessionSummary; seq: number }> {
    return this.postJson(`/sessions/${sessionId}/rotation`, { new_test_ref: newTestRef }, opts);
  }

  status(sessionId: string): Promise<{ session: SessionSummary; report: SignalReport; seq: number }> {
    return this.getJson(`/sessions/${sessionId}`);
  }

  meter(sessionId: string): Promise<MeterView> {
    return this.getJson(`/sessions/${sessionId}/meter`);
  }
}

/** Turn an id -> predicted-label map into the gateway's upload format. */
export function predictionsToJsonl(preds: Record<string, number>): string {
  return Object.entries(preds)
    .map(([id, pred]) => JSON.stringify({ id, pred }))
    .join('\n');
}
