/** Pure HTML-string rendering for the chat screen. No DOM access here —
 * the functions take view state and return markup, which keeps them
 * testable without a browser. All dynamic text is escaped. */

import type { ChatMessage, ChatViewState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function renderBadges(message: ChatMessage): string {
  if (message.badges.length === 0) {
    return "";
  }
  const pills = message.badges
    .map(
      (badge) =>
        `<span class="badge badge-${badge.kind.toLowerCase()}">` +
        `${escapeHtml(badge.label)}</span>`,
    )
    .join("");
  return `<div class="badges">${pills}</div>`;
}

function renderMessage(message: ChatMessage): string {
  return (
    `<div class="msg msg-${message.sender}" data-timestamp="` +
    `${escapeHtml(message.timestamp)}">` +
    `<div class="msg-text">${escapeHtml(message.text)}</div>` +
    renderBadges(message) +
    `</div>`
  );
}

/** Render the transcript in stored order, inserting a "Session N" divider
 * each time the session id changes. Messages without a known session never
 * produce a divider. */
export function renderMessages(state: ChatViewState): string {
  if (state.messages.length === 0 && state.pending === null) {
    return `<div class="empty-note">No messages yet. Say hello!</div>`;
  }
  const parts: string[] = [];
  let lastSession: number | null = null;
  for (const message of state.messages) {
    if (message.sessionId !== null && message.sessionId !== lastSession) {
      parts.push(
        `<div class="session-divider">Session ${message.sessionId}</div>`,
      );
      lastSession = message.sessionId;
    }
    parts.push(renderMessage(message));
  }
  if (state.pending !== null) {
    parts.push(`<div class="msg msg-pending">Sending…</div>`);
  }
  return parts.join("");
}

/** Render the error banner, or an empty string when there is none. The
 * retry button carries the banner source so the controller knows whether
 * to resend the message or reload the history. */
export function renderBanner(state: ChatViewState): string {
  const banner = state.errorBanner;
  if (banner === null) {
    return "";
  }
  return (
    `<div class="error-banner" role="alert">` +
    `<span class="error-text">${escapeHtml(banner.text)}</span>` +
    `<button type="button" class="retry-btn" data-source="` +
    `${banner.source}">Retry</button>` +
    `</div>`
  );
}
