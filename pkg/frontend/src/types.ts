// Wire types for the gateway HTTP API, plus the client-side view state.

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface RoutingSummary {
  abstained: boolean;
  service: string | null;
  score?: number;
  reason?: string;
  operations?: Array<Record<string, unknown>>;
}

export interface ChatResponse {
  request_id: string;
  session_id: string;
  status: 'ok' | 'awaiting_user' | 'error';
  answer: string | null;
  routing: RoutingSummary | null;
  clarification_question: string | null;
  error: string | null;
  cache_hit: boolean;
  worker: string | null;
  elapsed_s: number;
}

export interface TraceEvent {
  request_id: string;
  component: string;
  event: string;
  started_at: number;
  ended_at: number;
  attributes: Record<string, unknown>;
}

export interface ServiceSummary {
  name: string;
  description: string;
  utterances: string[];
  procedures: Array<{ name: string; description: string }>;
  endpoint: string;
  worker_class: string;
}

export interface SchedulerView {
  workers: Array<{
    worker_id: string;
    worker_class: string;
    resident_models: string[];
    resident_bytes: number;
    memory_budget_bytes: number;
    queued: string[];
    running: string | null;
  }>;
  sticky_sessions: Record<string, string>;
}

export interface CacheView {
  prompt_cache: {
    entries: number;
    capacity: number;
    hits: number;
    misses: number;
    evictions: number;
  };
  sessions: Record<string, unknown>;
}

export interface DriftView {
  reference_count: number;
  live_window: number;
  threshold: number;
  distance: number | null;
  alarmed: boolean;
  reason: string | null;
}

export interface HealthView {
  status: string;
  services: number;
  workers: string[];
  backend: string;
}

// one rendered bubble; badge names the service that answered (or "direct")
export interface ChatMessage {
  role: 'user' | 'assistant';
  text: string;
  badge?: string;
  requestId?: string;
}

export interface PendingClarification {
  requestId: string;
  question: string;
}

export interface ChatView {
  sessionId: string;
  messages: ChatMessage[];
  pending: PendingClarification | null;
  banner: string | null;
  busy: boolean;
}

export interface AdminView {
  services: ServiceSummary[];
  scheduler: SchedulerView | null;
  cache: CacheView | null;
  drift: DriftView | null;
  trace: { requestId: string; events: TraceEvent[] } | null;
  stale: boolean;
  lastUpdated: number | null;
}
