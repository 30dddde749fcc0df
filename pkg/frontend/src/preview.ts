// Debounced, order-preserving preview requests.
//
// Stroke commits, slider moves and reseeds all funnel through one
// controller: bursts coalesce into a single request 250 ms after the last
// event, every sent request gets a monotonically increasing id, and a
// response is applied only if no newer response has been applied already
// (stale responses are discarded, so previews always advance in request
// order).  Nothing here blocks: the transport is fully asynchronous.

import { Transport, TranslateRequest } from "./api.js";
import { SessionState } from "./session.js";

export interface PreviewUpdate {
  image: string;
  latencyMs: number;
  seed: number;
  gamma: number;
  requestId: number;
}

export interface PreviewHooks {
  onPreview: (update: PreviewUpdate) => void;
  onError: (message: string) => void;
}

export interface Scheduler {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const realScheduler: Scheduler = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
};

export const DEBOUNCE_MS = 250; // at most 4 requests per second

export class PreviewController {
  private pending: SessionState | null = null;
  private timer: unknown = null;
  private nextId = 1;
  private lastApplied = 0;
  private sent = 0;

  constructor(
    private transport: Transport,
    private hooks: PreviewHooks,
    private debounceMs: number = DEBOUNCE_MS,
    private scheduler: Scheduler = realScheduler,
  ) {}

  /** Schedule a preview for this state; rapid calls coalesce. */
  request(state: SessionState): void {
    this.pending = state;
    if (this.timer !== null) this.scheduler.clear(this.timer);
    this.timer = this.scheduler.set(() => this.fire(), this.debounceMs);
  }

  get sentCount(): number {
    return this.sent;
  }

  private fire(): void {
    this.timer = null;
    const state = this.pending;
    this.pending = null;
    if (state === null) return;
    const id = this.nextId++;
    this.sent++;
    const req: TranslateRequest = {
      image: state.canvasPng,
      domain: state.domain,
      gamma: state.gamma,
      seed: state.seed,
    };
    this.transport(req).then(
      (resp) => {
        if (id <= this.lastApplied) return; // superseded by a newer response
        this.lastApplied = id;
        this.hooks.onPreview({
          image: resp.image,
          latencyMs: resp.latency_ms,
          seed: resp.seed,
          gamma: resp.gamma,
          requestId: id,
        });
      },
      (err) => {
        this.hooks.onError(err instanceof Error ? err.message : String(err));
      },
    );
  }
}
