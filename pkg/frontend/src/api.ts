/** Typed HTTP client for the patient-chat service. All access goes through
 * the JSON endpoints under /api — this module is the only place the frontend
 * touches the network. */

export type EventKind = "SYMPTOM" | "DRUG";

export interface RecordedItem {
  kind: EventKind;
  lemma_key: string;
}

export interface ChatReply {
  patient_id: string;
  reply: string;
  intent: string;
  confidence: number;
  recorded: RecordedItem[];
  session_id: number;
  follow_up_pending: boolean;
  guideline_link?: string | null;
  evidence_sentences?: string[];
}

export interface ProfileEvent {
  timestamp: string;
  kind: EventKind;
  lemma_key: string;
  raw_text: string;
}

export interface ProfileSession {
  session_id: number;
  start: string;
  end: string;
  events: ProfileEvent[];
}

export interface PatientProfile {
  schema_version: number;
  patient_id: string;
  sessions: ProfileSession[];
}

export interface HealthInfo {
  status: string;
  version: string;
  graph_nodes: number;
}

/** Error carrying the HTTP status of a failed request so callers can
 * distinguish "not found" from a server fault. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(response: Response): Promise<string> {
  try {
    const body: unknown = await response.json();
    if (body && typeof body === "object" && "detail" in body) {
      const detail = (body as { detail: unknown }).detail;
      if (typeof detail === "string") {
        return detail;
      }
    }
  } catch {
    // non-JSON error body; fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}

export class ChatApi {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl =
      fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  /** POST /api/chat. `clientTimestamp` is optional; when omitted the server
   * clock decides which session the message lands in. */
  async sendChat(
    patientId: string,
    message: string,
    clientTimestamp?: string,
  ): Promise<ChatReply> {
    const payload: Record<string, string> = {
      patient_id: patientId,
      message,
    };
    if (clientTimestamp !== undefined) {
      payload.client_timestamp = clientTimestamp;
    }
    const response = await this.fetchImpl(`${this.baseUrl}/api/chat`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as ChatReply;
  }

  /** GET /api/patients/{id}. Returns null for an unknown patient (404);
   * any other failure throws. */
  async loadProfile(patientId: string): Promise<PatientProfile | null> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/patients/${encodeURIComponent(patientId)}`,
    );
    if (response.status === 404) {
      return null;
    }
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as PatientProfile;
  }

  /** GET /api/health. */
  async health(): Promise<HealthInfo> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/health`);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as HealthInfo;
  }
}
