// HTML renderers. Pure string-in string-out so they test without a DOM;
// main.ts assigns the results to innerHTML. Everything user- or
// server-supplied goes through escapeHtml.

import type { AdminView, ChatView, TraceEvent } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function renderBanner(view: ChatView): string {
  if (!view.banner) return '';
  return `<div class="banner" role="alert">${escapeHtml(view.banner)}</div>`;
}

export function renderMessages(view: ChatView): string {
  const bubbles = view.messages.map((message) => {
    const badge = message.badge
      ? `<span class="badge">${escapeHtml(message.badge)}</span>`
      : '';
    return (
      `<div class="bubble ${message.role}">` +
      `${badge}<p>${escapeHtml(message.text)}</p>` +
      `</div>`
    );
  });
  if (view.pending) {
    // the reply box is bound to the parked request so the resume call
    // can never target the wrong exchange
    bubbles.push(
      `<div class="bubble clarification" data-request-id="${escapeHtml(view.pending.requestId)}">` +
        `<input class="reply-input" placeholder="your answer" aria-label="clarification reply" />` +
        `<button class="reply-send">reply</button>` +
        `</div>`,
    );
  }
  return bubbles.join('\n');
}

export function renderServices(view: AdminView): string {
  if (view.services.length === 0) return '<p class="empty">no services registered</p>';
  const rows = view.services.map(
    (s) =>
      `<tr><td>${escapeHtml(s.name)}</td>` +
      `<td>${escapeHtml(s.worker_class)}</td>` +
      `<td>${s.procedures.map((p) => escapeHtml(p.name)).join(', ')}</td>` +
      `<td>${escapeHtml(s.endpoint)}</td></tr>`,
  );
  return (
    '<table class="services"><thead><tr>' +
    '<th>service</th><th>class</th><th>procedures</th><th>endpoint</th>' +
    `</tr></thead><tbody>${rows.join('')}</tbody></table>`
  );
}

export function renderTraceTimeline(view: AdminView): string {
  if (!view.trace) return '<p class="empty">no trace loaded</p>';
  const rows = view.trace.events.map((event: TraceEvent) => {
    const ms = ((event.ended_at - event.started_at) * 1000).toFixed(1);
    return (
      `<li><span class="component">${escapeHtml(event.component)}</span> ` +
      `${escapeHtml(event.event)} <span class="ms">${ms} ms</span></li>`
    );
  });
  return (
    `<h3>trace ${escapeHtml(view.trace.requestId)}</h3>` +
    `<ol class="timeline">${rows.join('')}</ol>`
  );
}

export function renderScheduler(view: AdminView): string {
  if (!view.scheduler) return '<p class="empty">no data yet</p>';
  const workers = view.scheduler.workers.map(
    (w) =>
      `<li>${escapeHtml(w.worker_id)} [${escapeHtml(w.worker_class)}] ` +
      `resident: ${w.resident_models.map(escapeHtml).join(', ') || 'none'} ` +
      `queued: ${w.queued.length} running: ${escapeHtml(w.running ?? 'idle')}</li>`,
  );
  const sticky = Object.entries(view.scheduler.sticky_sessions).map(
    ([session, worker]) => `<li>${escapeHtml(session)} &rarr; ${escapeHtml(worker)}</li>`,
  );
  return (
    `<ul class="workers">${workers.join('')}</ul>` +
    `<ul class="sticky">${sticky.join('') || '<li>no sticky sessions</li>'}</ul>`
  );
}

export function renderCache(view: AdminView): string {
  if (!view.cache) return '<p class="empty">no data yet</p>';
  const c = view.cache.prompt_cache;
  return (
    `<p>entries ${c.entries}/${c.capacity} &middot; hits ${c.hits} ` +
    `&middot; misses ${c.misses} &middot; evictions ${c.evictions}</p>`
  );
}

export function renderDrift(view: AdminView): string {
  if (!view.drift) return '<p class="empty">no data yet</p>';
  const d = view.drift;
  const alarm = d.alarmed ? '<span class="badge alarm">ALARM</span> ' : '';
  const distance = d.distance === null ? 'n/a' : d.distance.toFixed(3);
  return (
    `<p>${alarm}reference ${d.reference_count} &middot; live ${d.live_window} ` +
    `&middot; distance ${distance} (threshold ${d.threshold})</p>`
  );
}

export function renderStaleness(view: AdminView): string {
  if (!view.stale) return '';
  return '<div class="stale" role="status">showing stale data; last poll failed</div>';
}
