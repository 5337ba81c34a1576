// Read-only operator state: services, scheduler, cache, drift, and one
// trace timeline. A failed poll keeps the last good data and flags it
// stale instead of blanking the panels.

import { GatewayClient } from './client.js';
import type { AdminView, TraceEvent } from './types.js';

export function createAdminView(): AdminView {
  return {
    services: [],
    scheduler: null,
    cache: null,
    drift: null,
    trace: null,
    stale: false,
    lastUpdated: null,
  };
}

export async function refreshAdmin(view: AdminView, client: GatewayClient): Promise<AdminView> {
  try {
    const [services, scheduler, cache, drift] = await Promise.all([
      client.listServices(),
      client.scheduler(),
      client.cache(),
      client.drift(),
    ]);
    view.services = services;
    view.scheduler = scheduler;
    view.cache = cache;
    view.drift = drift;
    view.stale = false;
    view.lastUpdated = Date.now();
  } catch {
    view.stale = true;
  }
  return view;
}

export async function loadTrace(
  view: AdminView,
  client: GatewayClient,
  requestId: string,
): Promise<AdminView> {
  try {
    view.trace = { requestId, events: orderTimeline(await client.getTrace(requestId)) };
    view.stale = false;
  } catch {
    view.stale = true;
  }
  return view;
}

// timelines render in wall-clock order whatever order the wire delivered
export function orderTimeline(events: TraceEvent[]): TraceEvent[] {
  return [...events].sort((a, b) => a.started_at - b.started_at);
}

export function startPolling(
  view: AdminView,
  client: GatewayClient,
  intervalMs = 2000,
): () => void {
  const timer = setInterval(() => {
    void refreshAdmin(view, client);
  }, intervalMs);
  return () => clearInterval(timer);
}
