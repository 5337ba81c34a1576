// Browser wiring: binds the chat and admin views to the static page.
// Auth key and gateway URL live in the two inputs at the top of the page
// and travel with every request; nothing persists beyond the tab.

import { createAdminView, loadTrace, refreshAdmin, startPolling } from './admin.js';
import { createChatView, sendPrompt, submitReply } from './chat.js';
import { GatewayClient } from './client.js';
import {
  renderBanner,
  renderCache,
  renderDrift,
  renderMessages,
  renderScheduler,
  renderServices,
  renderStaleness,
  renderTraceTimeline,
} from './render.js';

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

export function boot(): void {
  const gatewayInput = el<HTMLInputElement>('gateway-url');
  const keyInput = el<HTMLInputElement>('auth-key');
  const promptInput = el<HTMLInputElement>('prompt');
  const sendButton = el<HTMLButtonElement>('send');
  const transcript = el<HTMLDivElement>('transcript');
  const bannerBox = el<HTMLDivElement>('banner');

  const chat = createChatView(`tab-${Date.now().toString(36)}`);
  const admin = createAdminView();
  let lastRequestId: string | null = null;

  const client = () => new GatewayClient(gatewayInput.value || 'http://127.0.0.1:8080');

  function paintChat(): void {
    bannerBox.innerHTML = renderBanner(chat);
    transcript.innerHTML = renderMessages(chat);
    sendButton.disabled = chat.busy;
    const last = chat.messages[chat.messages.length - 1];
    if (last && last.requestId) lastRequestId = last.requestId;
    const replyButton = transcript.querySelector<HTMLButtonElement>('.reply-send');
    const replyInput = transcript.querySelector<HTMLInputElement>('.reply-input');
    if (replyButton && replyInput) {
      replyButton.addEventListener('click', () => {
        void submitReply(chat, client(), keyInput.value, replyInput.value).then(() => {
          paintChat();
          void refreshTrace();
        });
      });
    }
    transcript.scrollTop = transcript.scrollHeight;
  }

  function paintAdmin(): void {
    el('services-panel').innerHTML = renderServices(admin);
    el('scheduler-panel').innerHTML = renderScheduler(admin);
    el('cache-panel').innerHTML = renderCache(admin);
    el('drift-panel').innerHTML = renderDrift(admin);
    el('trace-panel').innerHTML = renderTraceTimeline(admin);
    el('stale-box').innerHTML = renderStaleness(admin);
  }

  async function refreshTrace(): Promise<void> {
    if (lastRequestId) {
      await loadTrace(admin, client(), lastRequestId);
      paintAdmin();
    }
  }

  sendButton.addEventListener('click', () => {
    const prompt = promptInput.value.trim();
    if (!prompt || chat.busy) return;
    promptInput.value = '';
    void sendPrompt(chat, client(), keyInput.value, prompt).then(() => {
      paintChat();
      void refreshTrace();
    });
    paintChat();
  });
  promptInput.addEventListener('keydown', (event) => {
    if (event.key === 'Enter') sendButton.click();
  });

  // admin panels poll every 2 s; a failed poll flags staleness only
  startPolling(admin, client(), 2000);
  const repaint = setInterval(paintAdmin, 2000);
  window.addEventListener('beforeunload', () => clearInterval(repaint));
  void refreshAdmin(admin, client()).then(paintAdmin);
  paintChat();
}

if (typeof document !== 'undefined' && document.getElementById('transcript')) {
  boot();
}
