// Thin typed client over the gateway routes. Every method is one request;
// auth keys travel per call and are never stored here.

import type {
  CacheView,
  ChatResponse,
  DriftView,
  FetchLike,
  HealthView,
  SchedulerView,
  ServiceSummary,
  TraceEvent,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }

  get isAuthFailure(): boolean {
    return this.status === 401 || this.status === 403;
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchLike: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchLike(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchLike(`${this.baseUrl}${path}`).then((r) => asJson<T>(r));
  }

  chat(authKey: string, sessionId: string, prompt: string): Promise<ChatResponse> {
    return this.post('/v1/chat', { auth_key: authKey, session_id: sessionId, prompt });
  }

  resume(authKey: string, requestId: string, reply: string): Promise<ChatResponse> {
    return this.post(`/v1/requests/${encodeURIComponent(requestId)}/resume`, {
      auth_key: authKey,
      reply,
    });
  }

  getRequest(authKey: string, requestId: string): Promise<{ request: ChatResponse; graph: unknown }> {
    const id = encodeURIComponent(requestId);
    return this.get(`/v1/requests/${id}?auth_key=${encodeURIComponent(authKey)}`);
  }

  listServices(): Promise<ServiceSummary[]> {
    return this.get<{ services: ServiceSummary[] }>('/v1/services').then((b) => b.services);
  }

  // the one optional write besides chat/resume: descriptor upload
  registerService(descriptor: Record<string, unknown>): Promise<{ registered: string }> {
    return this.post('/v1/services', descriptor);
  }

  getTrace(requestId: string): Promise<TraceEvent[]> {
    const id = encodeURIComponent(requestId);
    return this.get<{ events: TraceEvent[] }>(`/v1/traces/${id}`).then((b) => b.events);
  }

  scheduler(): Promise<SchedulerView> {
    return this.get('/v1/admin/scheduler');
  }

  cache(): Promise<CacheView> {
    return this.get('/v1/admin/cache');
  }

  drift(): Promise<DriftView> {
    return this.get('/v1/admin/drift');
  }

  health(): Promise<HealthView> {
    return this.get('/healthz');
  }
}
