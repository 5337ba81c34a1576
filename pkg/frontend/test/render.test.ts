import { describe, expect, it } from 'vitest';

import { createAdminView, orderTimeline } from '../src/admin.js';
import { createChatView } from '../src/chat.js';
import {
  escapeHtml,
  renderBanner,
  renderDrift,
  renderMessages,
  renderScheduler,
  renderServices,
  renderStaleness,
  renderTraceTimeline,
} from '../src/render.js';
import type { AdminView, TraceEvent } from '../src/types.js';

function event(component: string, name: string, startedAt: number): TraceEvent {
  return {
    request_id: 'r1',
    component,
    event: name,
    started_at: startedAt,
    ended_at: startedAt + 0.001,
    attributes: {},
  };
}

describe('chat rendering', () => {
  it('renders bubbles with badges and escapes content', () => {
    const view = createChatView('s');
    view.messages.push({ role: 'user', text: '<script>alert(1)</script>' });
    view.messages.push({ role: 'assistant', text: 'The result is 8.', badge: 'calculator' });
    const html = renderMessages(view);
    expect(html).toContain('&lt;script&gt;');
    expect(html).not.toContain('<script>');
    expect(html).toContain('<span class="badge">calculator</span>');
  });

  it('binds the reply box to the parked request id', () => {
    const view = createChatView('s');
    view.pending = { requestId: 'req-u-s-0007', question: 'Which numbers?' };
    const html = renderMessages(view);
    expect(html).toContain('data-request-id="req-u-s-0007"');
    expect(html).toContain('reply-input');
    expect(html).toContain('reply-send');
  });

  it('shows the banner only when set', () => {
    const view = createChatView('s');
    expect(renderBanner(view)).toBe('');
    view.banner = 'auth failed: unknown auth key';
    expect(renderBanner(view)).toContain('auth failed');
  });
});

describe('admin rendering', () => {
  function populated(): AdminView {
    const view = createAdminView();
    view.services = [
      {
        name: 'calculator',
        description: 'Does arithmetic.',
        utterances: ['add {numbers} and {numbers}'],
        procedures: [{ name: 'add', description: '' }],
        endpoint: 'local://calculator',
        worker_class: '13B',
      },
    ];
    view.scheduler = {
      workers: [
        {
          worker_id: 'w0',
          worker_class: '13B',
          resident_models: ['model-13B'],
          resident_bytes: 26_000_000_000,
          memory_budget_bytes: 40_000_000_000,
          queued: [],
          running: null,
        },
      ],
      sticky_sessions: { 'demo:s1': 'w0' },
    };
    view.cache = {
      prompt_cache: { entries: 1, capacity: 10000, hits: 2, misses: 3, evictions: 0 },
      sessions: {},
    };
    view.drift = {
      reference_count: 40,
      live_window: 50,
      threshold: 0.3,
      distance: 0.321,
      alarmed: true,
      reason: 'drift',
    };
    return view;
  }

  it('renders the services table', () => {
    const html = renderServices(populated());
    expect(html).toContain('calculator');
    expect(html).toContain('13B');
    expect(html).toContain('local://calculator');
  });

  it('orders the trace timeline by start time', () => {
    const view = populated();
    const shuffled = [event('execution', 'plan', 3), event('gateway', 'chat', 1), event('router', 'route', 2)];
    view.trace = { requestId: 'r1', events: orderTimeline(shuffled) };
    const html = renderTraceTimeline(view);
    expect(view.trace.events.map((e) => e.component)).toEqual(['gateway', 'router', 'execution']);
    expect(html.indexOf('gateway')).toBeLessThan(html.indexOf('router'));
    expect(html.indexOf('router')).toBeLessThan(html.indexOf('execution'));
  });

  it('shows the drift alarm badge only when alarmed', () => {
    const view = populated();
    expect(renderDrift(view)).toContain('ALARM');
    view.drift = { ...view.drift!, alarmed: false };
    expect(renderDrift(view)).not.toContain('ALARM');
  });

  it('flags stale data after a failed poll', () => {
    const view = populated();
    expect(renderStaleness(view)).toBe('');
    view.stale = true;
    expect(renderStaleness(view)).toContain('stale');
  });

  it('admin panels are read-only markup', () => {
    const view = populated();
    view.trace = { requestId: 'r1', events: [event('gateway', 'chat', 1)] };
    const panels =
      renderServices(view) +
      renderScheduler(view) +
      renderTraceTimeline(view) +
      renderDrift(view) +
      renderStaleness(view);
    expect(panels).not.toMatch(/<(input|button|form|select|textarea)\b/);
  });

  it('escapeHtml neutralizes every special character', () => {
    expect(escapeHtml(`<a href="x" onclick='y'>&`)).toBe(
      '&lt;a href=&quot;x&quot; onclick=&#39;y&#39;&gt;&amp;',
    );
  });
});
