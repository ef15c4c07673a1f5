/** Injectable time sources so tests can drive the session deterministically. */

export interface Clock {
  /** Monotone milliseconds; response times are differences of this. */
  now(): number;
}

/** Schedules a callback; the returned function cancels it. */
export interface Scheduler {
  after(ms: number, fn: () => void): () => void;
}

export const monotonicClock: Clock = {
  now: () => performance.now(),
};

export const timeoutScheduler: Scheduler = {
  after(ms: number, fn: () => void): () => void {
    const id = setTimeout(fn, ms);
    return () => clearTimeout(id);
  },
};
