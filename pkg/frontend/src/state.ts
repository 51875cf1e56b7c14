/** Pure view-state for the chat screen. Every transition returns a new
 * state object; nothing here touches the DOM or the network, so the whole
 * module is unit-testable in plain Node.
 *
 * Invariants enforced here:
 *  - at most one request is in flight (`beginSend` refuses while pending);
 *  - the transcript keeps server order — messages are appended in the order
 *    the server acknowledged them and history is rendered exactly as the
 *    profile lists it, never re-sorted client-side;
 *  - badges are copied from the server's `recorded` list (or the stored
 *    profile events), never inferred from message text. */

import type { ChatReply, PatientProfile, EventKind } from "./api.js";

export interface Badge {
  readonly kind: EventKind;
  readonly label: string;
}

export interface ChatMessage {
  readonly sender: "patient" | "bot";
  readonly text: string;
  readonly timestamp: string;
  readonly badges: readonly Badge[];
  /** Server session the message belongs to; null when unknown (e.g. a
   * banner-free local echo before any reply arrived). */
  readonly sessionId: number | null;
}

export interface PendingSend {
  readonly text: string;
  readonly startedAt: string;
}

export interface ErrorBanner {
  readonly source: "send" | "history";
  readonly text: string;
  /** Message text to resend when the banner's retry button is pressed;
   * null for history errors (retry reloads the profile instead). */
  readonly retryText: string | null;
}

export interface ChatViewState {
  readonly patientId: string;
  readonly messages: readonly ChatMessage[];
  readonly draft: string;
  readonly pending: PendingSend | null;
  readonly errorBanner: ErrorBanner | null;
}

export function initialState(patientId: string): ChatViewState {
  return {
    patientId,
    messages: [],
    draft: "",
    pending: null,
    errorBanner: null,
  };
}

export function setDraft(state: ChatViewState, draft: string): ChatViewState {
  return { ...state, draft };
}

/** Sending is allowed only when the draft has visible content and no other
 * request is in flight. */
export function canSend(state: ChatViewState): boolean {
  return state.pending === null && state.draft.trim().length > 0;
}

/** Mark the draft as in flight. Returns the state unchanged (same object)
 * when sending is not allowed, so callers can detect the refusal. */
export function beginSend(state: ChatViewState, nowIso: string): ChatViewState {
  if (!canSend(state)) {
    return state;
  }
  return {
    ...state,
    pending: { text: state.draft.trim(), startedAt: nowIso },
  };
}

function badgesFromRecorded(reply: ChatReply): readonly Badge[] {
  return reply.recorded.map((item) => ({
    kind: item.kind,
    label: item.lemma_key,
  }));
}

/** Append the acknowledged patient message and the bot reply. Clears the
 * draft, the pending marker, and any stale error banner. */
export function replyReceived(
  state: ChatViewState,
  reply: ChatReply,
  receivedAtIso: string,
): ChatViewState {
  if (state.pending === null) {
    return state;
  }
  const patientMessage: ChatMessage = {
    sender: "patient",
    text: state.pending.text,
    timestamp: state.pending.startedAt,
    badges: [],
    sessionId: reply.session_id,
  };
  const botMessage: ChatMessage = {
    sender: "bot",
    text: reply.reply,
    timestamp: receivedAtIso,
    badges: badgesFromRecorded(reply),
    sessionId: reply.session_id,
  };
  return {
    ...state,
    messages: [...state.messages, patientMessage, botMessage],
    draft: "",
    pending: null,
    errorBanner: null,
  };
}

/** A send failed (network error or non-2xx). The draft is retained so the
 * patient can edit or retry; the banner offers a one-click retry. */
export function sendFailed(
  state: ChatViewState,
  errorText: string,
): ChatViewState {
  if (state.pending === null) {
    return state;
  }
  return {
    ...state,
    pending: null,
    errorBanner: {
      source: "send",
      text: errorText,
      retryText: state.pending.text,
    },
  };
}

/** Replace the transcript with the stored history. A null profile (unknown
 * patient) yields an empty transcript and no error. Events become patient
 * bubbles in exactly the order the server lists them, each badged with the
 * kind/lemma the server recorded. */
export function historyLoaded(
  state: ChatViewState,
  profile: PatientProfile | null,
): ChatViewState {
  const messages: ChatMessage[] = [];
  if (profile !== null) {
    for (const session of profile.sessions) {
      for (const event of session.events) {
        messages.push({
          sender: "patient",
          text: event.raw_text.length > 0 ? event.raw_text : event.lemma_key,
          timestamp: event.timestamp,
          badges: [{ kind: event.kind, label: event.lemma_key }],
          sessionId: session.session_id,
        });
      }
    }
  }
  return { ...state, messages, errorBanner: null };
}

/** Loading the history failed (server fault, not a 404). */
export function historyFailed(
  state: ChatViewState,
  errorText: string,
): ChatViewState {
  return {
    ...state,
    errorBanner: { source: "history", text: errorText, retryText: null },
  };
}

export function dismissBanner(state: ChatViewState): ChatViewState {
  if (state.errorBanner === null) {
    return state;
  }
  return { ...state, errorBanner: null };
}
