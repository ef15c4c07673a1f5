/** Session loop: fixation, question, timeout, submission, breaks, completion. */

import {
  ApiError,
  Choice,
  NetworkError,
  QuestionPayload,
  StudyApi,
  SubmitBody,
} from "./api.js";
import { Clock, Scheduler } from "./timing.js";

export type Phase = "fixation" | "awaiting-answer" | "break" | "done" | "error";

export class UiSessionState {
  phase: Phase = "fixation";
  question: QuestionPayload | null = null;
  answered = 0;
  total = 0;
  /** End of the current fixation or answer window on the session clock. */
  deadline = 0;

  constructor(
    readonly sessionId: string,
    readonly token: string,
    private readonly clock: Clock,
  ) {}

  get remainingMs(): number {
    if (this.phase !== "fixation" && this.phase !== "awaiting-answer") return 0;
    return Math.max(0, this.deadline - this.clock.now());
  }
}

/** Everything the loop shows; the DOM implementation lives in render.ts. */
export interface SessionView {
  showFixation(state: UiSessionState): void;
  showQuestion(
    state: UiSessionState,
    q: QuestionPayload,
    onChoice: (choice: "left" | "right") => void,
  ): void;
  showBreak(state: UiSessionState, onContinue: () => void): void;
  showDone(state: UiSessionState): void;
  showError(state: UiSessionState, message: string): void;
  /** Called during fixation so stimulus assets are ready at onset. */
  preload(q: QuestionPayload): void;
}

export interface RunnerOptions {
  maxRetries?: number;
  retryDelayMs?: number;
}

export class SessionRunner {
  readonly state: UiSessionState;
  private readonly maxRetries: number;
  private readonly retryDelayMs: number;
  private cancelTimer: (() => void) | null = null;
  private onsetAt = 0;
  private lastBreakContinued = 0;
  private stopped = false;

  constructor(
    private readonly api: StudyApi,
    private readonly view: SessionView,
    private readonly clock: Clock,
    private readonly scheduler: Scheduler,
    ids: { sessionId: string; token: string },
    opts: RunnerOptions = {},
  ) {
    this.state = new UiSessionState(ids.sessionId, ids.token, clock);
    this.maxRetries = opts.maxRetries ?? 5;
    this.retryDelayMs = opts.retryDelayMs ?? 500;
  }

  async start(): Promise<void> {
    await this.advance();
  }

  /** Cancels the pending timer and freezes the loop (teardown, asset failure). */
  pause(message: string): void {
    this.stopped = true;
    this.cancelTimer?.();
    this.cancelTimer = null;
    this.state.phase = "error";
    this.view.showError(this.state, message);
  }

  private async advance(): Promise<void> {
    if (this.stopped) return;
    let next;
    for (let attempt = 0; ; attempt++) {
      try {
        next = await this.api.nextQuestion(this.state.sessionId, this.state.token);
        break;
      } catch (err) {
        if (err instanceof NetworkError && attempt < this.maxRetries) {
          await this.sleep(this.retryDelayMs * (attempt + 1));
          continue;
        }
        this.fail(err);
        return;
      }
    }
    if (next.completed) {
      this.state.answered = next.answered;
      this.state.total = next.total;
      this.state.question = null;
      this.state.phase = "done";
      this.view.showDone(this.state);
      return;
    }
    const q = next;
    this.state.question = q;
    this.state.answered = q.index - 1;
    this.state.total = q.total;
    if (q.break && q.index !== this.lastBreakContinued) {
      this.state.phase = "break";
      this.view.showBreak(this.state, () => {
        this.lastBreakContinued = q.index;
        this.beginFixation(q);
      });
      return;
    }
    this.beginFixation(q);
  }

  private beginFixation(q: QuestionPayload): void {
    if (this.stopped) return;
    this.state.phase = "fixation";
    this.state.deadline = this.clock.now() + q.fixation_ms;
    this.view.preload(q);
    this.view.showFixation(this.state);
    this.cancelTimer = this.scheduler.after(q.fixation_ms, () => this.beginQuestion(q));
  }

  private beginQuestion(q: QuestionPayload): void {
    if (this.stopped) return;
    this.state.phase = "awaiting-answer";
    this.onsetAt = this.clock.now();
    this.state.deadline = this.onsetAt + q.answer_timeout_ms;
    let settled = false;
    this.view.showQuestion(this.state, q, (choice) => {
      if (settled || this.stopped) return;
      settled = true;
      this.cancelTimer?.();
      this.cancelTimer = null;
      void this.submit(q, choice, this.clock.now() - this.onsetAt);
    });
    this.cancelTimer = this.scheduler.after(q.answer_timeout_ms, () => {
      if (settled || this.stopped) return;
      settled = true;
      this.cancelTimer = null;
      // the server rejects a timeout reported before its own deadline
      const elapsed = Math.max(this.clock.now() - this.onsetAt, q.answer_timeout_ms);
      void this.submit(q, "timeout", elapsed);
    });
  }

  private async submit(q: QuestionPayload, choice: Choice, responseMs: number): Promise<void> {
    // one body object for every attempt, so retries are byte-identical and
    // the server's idempotent-resubmission branch recognizes them
    const body: SubmitBody = {
      token: this.state.token,
      index: q.index,
      choice,
      response_ms: responseMs,
    };
    for (let attempt = 0; ; attempt++) {
      try {
        await this.api.submitAnswer(this.state.sessionId, body);
        break;
      } catch (err) {
        if (err instanceof ApiError && err.code === "sequence_error") {
          // the answer landed but the acknowledgement was lost; resync below
          if (err.expectedState["expected_index"] === q.index + 1) break;
          this.fail(err);
          return;
        }
        if (err instanceof NetworkError && attempt < this.maxRetries) {
          await this.sleep(this.retryDelayMs * (attempt + 1));
          continue;
        }
        this.fail(err);
        return;
      }
    }
    this.state.answered = q.index;
    await this.advance();
  }

  private fail(err: unknown): void {
    this.stopped = true;
    this.cancelTimer?.();
    this.cancelTimer = null;
    this.state.phase = "error";
    const message =
      err instanceof ApiError
        ? `${err.code}: ${err.message}`
        : err instanceof Error
          ? err.message
          : String(err);
    this.view.showError(this.state, message);
  }

  private sleep(ms: number): Promise<void> {
    return new Promise((resolve) => this.scheduler.after(ms, resolve));
  }
}
