/** Typed client for the study service HTTP/JSON API. */

export interface ItemRef {
  id: number;
  label: string;
}

export interface QuestionPayload {
  session_id: string;
  completed: false;
  index: number;
  total: number;
  anchor: ItemRef;
  left: ItemRef;
  right: ItemRef;
  break: boolean;
  fixation_ms: number;
  answer_timeout_ms: number;
}

export interface SessionCompleted {
  session_id: string;
  completed: true;
  answered: number;
  total: number;
}

export type NextQuestion = QuestionPayload | SessionCompleted;

export type Choice = "left" | "right" | "timeout";

export interface SubmitBody {
  token: string;
  index: number;
  choice: Choice;
  response_ms: number;
}

export interface SubmitAck {
  recorded: boolean;
  session_id: string;
  index: number;
  next_index: number | null;
  session_completed: boolean;
}

export interface ValidationPayload {
  session_id: string;
  gold_total: number;
  gold_errors: number;
  error_rate: number;
  threshold: number;
  accepted: boolean;
}

/** Structured refusal from the service ({code, message, expected_state}). */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly expectedState: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Transport-level failure; the request may or may not have been applied. */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

/** What the session loop needs from the server; the mock in tests implements it too. */
export interface StudyApi {
  nextQuestion(sessionId: string, token: string): Promise<NextQuestion>;
  submitAnswer(sessionId: string, body: SubmitBody): Promise<SubmitAck>;
  validation(sessionId: string): Promise<ValidationPayload>;
}

export class HttpStudyApi implements StudyApi {
  private readonly base: string;

  constructor(serverUrl: string) {
    this.base = serverUrl.replace(/\/+$/, "");
  }

  nextQuestion(sessionId: string, token: string): Promise<NextQuestion> {
    const query = new URLSearchParams({ token });
    return this.request<NextQuestion>(
      `/sessions/${encodeURIComponent(sessionId)}/next?${query}`, {});
  }

  submitAnswer(sessionId: string, body: SubmitBody): Promise<SubmitAck> {
    return this.request<SubmitAck>(`/sessions/${encodeURIComponent(sessionId)}/answers`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  validation(sessionId: string): Promise<ValidationPayload> {
    return this.request<ValidationPayload>(
      `/sessions/${encodeURIComponent(sessionId)}/validation`, {});
  }

  private async request<T>(path: string, init: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.base + path, init);
    } catch (err) {
      throw new NetworkError(err instanceof Error ? err.message : String(err));
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      // structured body expected; fall through to the status check
    }
    if (!response.ok) {
      const doc = (payload ?? {}) as Record<string, unknown>;
      throw new ApiError(
        typeof doc.code === "string" ? doc.code : "http_error",
        typeof doc.message === "string" ? doc.message : `HTTP ${response.status}`,
        response.status,
        (doc.expected_state as Record<string, unknown>) ?? {},
      );
    }
    return payload as T;
  }
}
