/** Thin fetch client for the review API. Errors carry the HTTP status so the
 * UI can distinguish conflicts (409) from validation failures (422). */

import type {
  DecisionBody,
  GroundTruthPayload,
  JobStatus,
  ReevaluateResponse,
  ResultsPayload,
  TargetInfo,
  TriageItem,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText || `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (typeof body?.detail === 'string') detail = body.detail;
    else if (typeof body?.error === 'string') detail = body.error;
    else if (body?.detail) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    private readonly base = '',
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method: 'POST',
      headers: body === undefined ? {} : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  targets(): Promise<TargetInfo[]> {
    return this.get('/api/targets');
  }

  queue(target: string, status = 'pending'): Promise<TriageItem[]> {
    const params = new URLSearchParams({ target, status });
    return this.get(`/api/queue?${params}`);
  }

  decide(itemId: string, body: DecisionBody): Promise<TriageItem> {
    return this.post(`/api/queue/${encodeURIComponent(itemId)}/decision`, body);
  }

  reevaluate(target: string): Promise<ReevaluateResponse> {
    const params = new URLSearchParams({ target });
    return this.post(`/api/reevaluate?${params}`);
  }

  job(jobId: string): Promise<JobStatus> {
    return this.get(`/api/jobs/${encodeURIComponent(jobId)}`);
  }

  results(target: string, setup?: string): Promise<ResultsPayload> {
    const params = new URLSearchParams({ target });
    if (setup) params.set('setup', setup);
    return this.get(`/api/results?${params}`);
  }

  groundTruth(target: string): Promise<GroundTruthPayload> {
    const params = new URLSearchParams({ target });
    return this.get(`/api/ground-truth?${params}`);
  }

  /** Poll a re-evaluation job until it settles. */
  async waitForJob(jobId: string, timeoutMs = 60_000, pollMs = 250): Promise<JobStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.job(jobId);
      if (job.status === 'done' || job.status === 'failed') return job;
      if (Date.now() > deadline) throw new ApiError(0, `job ${jobId} timed out`);
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }
}
