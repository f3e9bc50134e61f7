/**
 * Typed client for the annotation service JSON API.
 *
 * Every method maps onto exactly one documented endpoint; nothing is cached
 * here, the server is the single source of truth.
 */

export type LabelMode = 'single_label' | 'multi_label';

export interface SessionInfo {
  session_id: string;
  classes: string[];
  mode: LabelMode;
}

export interface BatchDoc {
  doc_id: number;
  text: string;
}

export interface BatchView {
  batch: BatchDoc[];
  seq: number;
  done: boolean;
}

export interface StoppingView {
  name: string;
  value: number | null;
  should_stop: boolean;
}

export interface SubmitResult {
  labeled: number;
  unlabeled: number;
  round: number;
  stopping: StoppingView;
}

export interface StatusView {
  session_id: string;
  classes: string[];
  mode: LabelMode;
  labeled: number;
  unlabeled: number;
  round: number;
  seq: number;
  done: boolean;
  stopping: StoppingView;
}

/** Non-2xx response, carrying the server's {error, detail} body. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: unknown,
  ) {
    super(`${status} ${code}`);
  }
}

type FetchFn = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchFn = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const err = body as { error?: string; detail?: unknown };
      throw new ApiError(response.status, err.error ?? 'unknown_error', err.detail);
    }
    return body as T;
  }

  createSession(): Promise<SessionInfo> {
    return this.request<SessionInfo>('/api/session', { method: 'POST' });
  }

  getBatch(sessionId: string): Promise<BatchView> {
    return this.request<BatchView>(`/api/session/${sessionId}/batch`);
  }

  submitLabels(
    sessionId: string,
    seq: number,
    labels: Record<string, string[]>,
  ): Promise<SubmitResult> {
    return this.request<SubmitResult>(`/api/session/${sessionId}/labels`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ seq, labels }),
    });
  }

  getStatus(sessionId: string): Promise<StatusView> {
    return this.request<StatusView>(`/api/session/${sessionId}/status`);
  }

  exportUrl(sessionId: string, format: 'csv' | 'jsonl'): string {
    return `${this.baseUrl}/api/session/${sessionId}/export?format=${format}`;
  }
}
