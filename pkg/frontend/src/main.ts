/** Browser bootstrap: wires the pure state/render modules to the DOM and
 * the HTTP client. This file is the only one that touches `document`; the
 * startup block is guarded so importing the module under Node (for the
 * pure helpers) is safe. */

import { ApiError, ChatApi } from "./api.js";
import {
  beginSend,
  canSend,
  dismissBanner,
  historyFailed,
  historyLoaded,
  initialState,
  replyReceived,
  sendFailed,
  setDraft,
  type ChatViewState,
} from "./state.js";
import { renderBanner, renderMessages } from "./render.js";

const PATIENT_STORAGE_KEY = "medgraphbot.patient_id";

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

/** Decide who is chatting: a `?patient=` URL parameter wins and is
 * remembered; otherwise the remembered id is reused; otherwise a fresh
 * local id is generated and remembered. Pure given its inputs, so it is
 * unit-testable without a browser. */
export function resolvePatientId(
  search: string,
  storage: StorageLike,
  randomSuffix: () => string = () =>
    Math.random().toString(36).slice(2, 10),
): string {
  const fromUrl = new URLSearchParams(search).get("patient");
  if (fromUrl !== null && fromUrl.trim().length > 0) {
    const id = fromUrl.trim();
    storage.setItem(PATIENT_STORAGE_KEY, id);
    return id;
  }
  const remembered = storage.getItem(PATIENT_STORAGE_KEY);
  if (remembered !== null && remembered.length > 0) {
    return remembered;
  }
  const generated = `guest-${randomSuffix()}`;
  storage.setItem(PATIENT_STORAGE_KEY, generated);
  return generated;
}

function mustFind<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (element === null) {
    throw new Error(`missing element #${id}`);
  }
  return element as T;
}

function errorText(error: unknown): string {
  if (error instanceof ApiError) {
    return `The server rejected the request: ${error.message}`;
  }
  return "Could not reach the server. Check your connection and retry.";
}

function startApp(): void {
  const api = new ChatApi("");
  const messagesEl = mustFind<HTMLDivElement>("messages");
  const bannerEl = mustFind<HTMLDivElement>("banner");
  const formEl = mustFind<HTMLFormElement>("composer");
  const inputEl = mustFind<HTMLInputElement>("message-input");
  const sendEl = mustFind<HTMLButtonElement>("send-btn");
  const patientEl = mustFind<HTMLSpanElement>("patient-label");

  const patientId = resolvePatientId(window.location.search, window.localStorage);
  let state: ChatViewState = initialState(patientId);
  patientEl.textContent = patientId;

  function redraw(): void {
    messagesEl.innerHTML = renderMessages(state);
    bannerEl.innerHTML = renderBanner(state);
    sendEl.disabled = !canSend(state);
    if (inputEl.value !== state.draft) {
      inputEl.value = state.draft;
    }
    messagesEl.scrollTop = messagesEl.scrollHeight;
    const retryBtn = bannerEl.querySelector<HTMLButtonElement>(".retry-btn");
    if (retryBtn !== null) {
      retryBtn.addEventListener("click", onRetry);
    }
  }

  async function submitText(text: string): Promise<void> {
    state = setDraft(state, text);
    const next = beginSend(state, new Date().toISOString());
    if (next === state) {
      return; // empty draft or another request already in flight
    }
    state = next;
    redraw();
    try {
      const reply = await api.sendChat(state.patientId, text.trim());
      state = replyReceived(state, reply, new Date().toISOString());
    } catch (error) {
      state = sendFailed(state, errorText(error));
    }
    redraw();
  }

  async function loadHistory(): Promise<void> {
    try {
      const profile = await api.loadProfile(patientId);
      state = historyLoaded(state, profile);
    } catch (error) {
      state = historyFailed(state, errorText(error));
    }
    redraw();
  }

  function onRetry(): void {
    const banner = state.errorBanner;
    if (banner === null) {
      return;
    }
    if (banner.source === "send" && banner.retryText !== null) {
      const text = banner.retryText;
      state = dismissBanner(state);
      void submitText(text);
    } else {
      state = dismissBanner(state);
      void loadHistory();
    }
  }

  formEl.addEventListener("submit", (event) => {
    event.preventDefault();
    void submitText(inputEl.value);
  });
  inputEl.addEventListener("input", () => {
    state = setDraft(state, inputEl.value);
    sendEl.disabled = !canSend(state);
  });

  redraw();
  void loadHistory();
}

if (typeof document !== "undefined" && typeof window !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", startApp);
  } else {
    startApp();
  }
}
