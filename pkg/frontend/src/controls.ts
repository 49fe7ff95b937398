/**
 * Control-edit plumbing shared by all widgets: local validation mirrors
 * the engine invariants (bad edits never reach the wire), sends are rate
 * limited to at most one message per 200 ms per control (trailing edge
 * wins), the control is marked pending until the next config_ack, and an
 * error event means the widget snaps back to the acked value.
 */

import type { ControlMessage } from "./protocol.js";
import { attenValid, thresholdsValid } from "./protocol.js";
import type { ControlSession } from "./socket.js";
import { PanelStore } from "./state.js";

export const MIN_SEND_INTERVAL_MS = 200; // <= 5 messages per second

export interface ClockLike {
  now(): number;
  setTimeout(fn: () => void, ms: number): unknown;
}

const wallClock: ClockLike = {
  now: () => Date.now(),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
};

export class RateLimiter {
  private lastSent = -Infinity;
  private queued: (() => void) | null = null;
  private timerArmed = false;

  constructor(private clock: ClockLike = wallClock, private intervalMs = MIN_SEND_INTERVAL_MS) {}

  /** Run now if the interval has elapsed, else queue it; a newer call
   * replaces anything still waiting. */
  submit(fn: () => void): void {
    const now = this.clock.now();
    const due = this.lastSent + this.intervalMs;
    if (now >= due) {
      this.lastSent = now;
      fn();
      return;
    }
    this.queued = fn;
    if (!this.timerArmed) {
      this.timerArmed = true;
      this.clock.setTimeout(() => this.flush(), due - now);
    }
  }

  private flush(): void {
    this.timerArmed = false;
    const fn = this.queued;
    this.queued = null;
    if (fn) {
      this.lastSent = this.clock.now();
      fn();
    }
  }
}

export interface EditResult {
  sent: boolean;
  reason?: string;
}

export class ControlPanel {
  private limiters = new Map<string, RateLimiter>();

  constructor(
    private session: ControlSession,
    private store: PanelStore,
    private clock: ClockLike = wallClock,
  ) {}

  private limiter(control: string): RateLimiter {
    let lim = this.limiters.get(control);
    if (!lim) {
      lim = new RateLimiter(this.clock);
      this.limiters.set(control, lim);
    }
    return lim;
  }

  private dispatch(control: string, message: ControlMessage): EditResult {
    if (this.store.get().status !== "connected") {
      return { sent: false, reason: "not connected" };
    }
    this.store.markPending(control);
    this.limiter(control).submit(() => this.session.send(message));
    return { sent: true };
  }

  setAtten(db: number): EditResult {
    if (!attenValid(db)) return { sent: false, reason: "attenuation must be >= 0 dB" };
    return this.dispatch("atten", { type: "set_atten", db });
  }

  setThresholds(silenceBelow: number, dfOffAbove: number): EditResult {
    if (!thresholdsValid(silenceBelow, dfOffAbove)) {
      return { sent: false, reason: "thresholds must satisfy -15 <= silence < df_off <= 35" };
    }
    return this.dispatch("thresholds", {
      type: "set_thresholds",
      silence_below_db: silenceBelow,
      df_off_above_db: dfOffAbove,
    });
  }

  setStages(erb: boolean, df: boolean): EditResult {
    return this.dispatch("stages", { type: "set_stages", erb, df });
  }

  setEstimator(kind: "passthrough" | "blind"): EditResult {
    return this.dispatch("estimator", { type: "set_estimator", kind });
  }
}
