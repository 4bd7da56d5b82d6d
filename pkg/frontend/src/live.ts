import type { LiveMessage } from "./types.js";

/** Frames older than this mark the grid as stale. */
export const STALE_AFTER_MS = 500;

const BACKOFF_INITIAL_MS = 500;
const BACKOFF_MAX_MS = 8000;

/** The subset of the WebSocket API the feed touches, so tests can inject a fake. */
export interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export type FeedStatus = "connecting" | "open" | "closed";

function isLiveMessage(value: unknown): value is LiveMessage {
  const m = value as LiveMessage;
  return (
    typeof m === "object" &&
    m !== null &&
    typeof m.t_ms === "number" &&
    Array.isArray(m.heights_mm) &&
    (m.source === "tracking" || m.source === "playback")
  );
}

/**
 * Live frame subscription with latest-wins semantics: only the newest frame
 * is kept, the render loop reads it at its own tick rate. Reconnects after a
 * drop with exponential backoff, reset once a connection opens.
 */
export class LiveFeed {
  latest: LiveMessage | null = null;
  status: FeedStatus = "closed";
  lastFrameAt = Number.NEGATIVE_INFINITY;

  private attempt = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private ws: WebSocketLike | null = null;
  private stopped = true;

  constructor(
    private url: string,
    private makeSocket: WebSocketFactory,
    private now: () => number = () => Date.now(),
    public onChange: () => void = () => {},
  ) {}

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const ws = this.ws;
    this.ws = null;
    ws?.close();
    this.status = "closed";
  }

  /** True when no frame has arrived within the freshness window. */
  isStale(): boolean {
    return this.now() - this.lastFrameAt > STALE_AFTER_MS;
  }

  reconnectDelayMs(attempt: number): number {
    return Math.min(BACKOFF_INITIAL_MS * 2 ** attempt, BACKOFF_MAX_MS);
  }

  private connect(): void {
    this.status = "connecting";
    const ws = this.makeSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.status = "open";
      this.onChange();
    };
    ws.onmessage = (ev) => {
      let parsed: unknown;
      try {
        parsed = JSON.parse(String(ev.data));
      } catch {
        return; // not ours to crash on
      }
      if (!isLiveMessage(parsed)) return;
      this.latest = parsed;
      this.lastFrameAt = this.now();
      this.onChange();
    };
    ws.onclose = () => {
      if (this.ws !== ws) return; // superseded by stop() or a newer socket
      this.status = "closed";
      this.onChange();
      this.scheduleReconnect();
    };
    ws.onerror = () => {
      // the close event that follows drives the reconnect
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.timer !== null) return;
    const delay = this.reconnectDelayMs(this.attempt);
    this.attempt += 1;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, delay);
  }
}
