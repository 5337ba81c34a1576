// Conversation state machine. Bubbles are appended only after the server
// accepts a turn, so the rendered order always matches the server-side
// session history (user turn, then assistant turn).

import { ApiError, GatewayClient } from './client.js';
import type { ChatResponse, ChatView } from './types.js';

export function createChatView(sessionId: string): ChatView {
  return { sessionId, messages: [], pending: null, banner: null, busy: false };
}

function badgeFor(response: ChatResponse): string {
  if (response.routing && !response.routing.abstained && response.routing.service) {
    return response.routing.service;
  }
  return 'direct';
}

function applyResponse(view: ChatView, prompt: string, response: ChatResponse): void {
  view.banner = null;
  view.messages.push({ role: 'user', text: prompt });
  if (response.status === 'awaiting_user') {
    const question = response.clarification_question ?? 'Can you clarify?';
    view.messages.push({
      role: 'assistant',
      text: question,
      badge: badgeFor(response),
      requestId: response.request_id,
    });
    view.pending = { requestId: response.request_id, question };
    return;
  }
  if (response.status === 'error') {
    view.messages.push({
      role: 'assistant',
      text: response.error ?? 'request failed',
      badge: 'error',
      requestId: response.request_id,
    });
    return;
  }
  view.messages.push({
    role: 'assistant',
    text: response.answer ?? '',
    badge: badgeFor(response),
    requestId: response.request_id,
  });
}

function applyFailure(view: ChatView, failure: unknown): void {
  if (failure instanceof ApiError && failure.isAuthFailure) {
    // auth failures never touch the transcript, only the banner
    view.banner = `auth failed: ${failure.detail}`;
    return;
  }
  if (failure instanceof ApiError) {
    view.banner = `request failed (${failure.status}): ${failure.detail}`;
    return;
  }
  view.banner = 'network error; check the gateway URL and retry';
}

export async function sendPrompt(
  view: ChatView,
  client: GatewayClient,
  authKey: string,
  prompt: string,
): Promise<ChatView> {
  if (view.busy) {
    throw new Error('a chat request is already in flight for this session');
  }
  view.busy = true;
  try {
    applyResponse(view, prompt, await client.chat(authKey, view.sessionId, prompt));
  } catch (failure) {
    applyFailure(view, failure);
  } finally {
    view.busy = false;
  }
  return view;
}

export async function submitReply(
  view: ChatView,
  client: GatewayClient,
  authKey: string,
  reply: string,
): Promise<ChatView> {
  if (view.pending === null) {
    throw new Error('no clarification is pending');
  }
  if (view.busy) {
    throw new Error('a chat request is already in flight for this session');
  }
  view.busy = true;
  const requestId = view.pending.requestId;
  try {
    const response = await client.resume(authKey, requestId, reply);
    view.pending = null;
    applyResponse(view, reply, response);
  } catch (failure) {
    applyFailure(view, failure);
  } finally {
    view.busy = false;
  }
  return view;
}
