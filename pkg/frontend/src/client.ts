import { controlMessage, parseFrame, pingMessage } from "./protocol";
import type { StateFrame } from "./protocol";
import type { ControlSample } from "./input";

// Bridge socket client: one state-frame consumer, periodic pings for a live
// round-trip readout, and automatic reconnect. Reconnecting changes nothing
// server-side beyond gate input availability, so the client keeps no session
// state worth preserving.

export const CLOSE_UNKNOWN_TYPE = 4000;
export const CLOSE_SINGLE_OPERATOR = 4001;

const PING_INTERVAL_MS = 1000;
const BACKOFF_MS = [500, 1000, 2000, 4000];
const REJECTED_RETRY_MS = 5000;

export type ConnectionKind = "connecting" | "open" | "closed" | "rejected";

export interface ConnectionStatus {
  kind: ConnectionKind;
  detail?: string;
}

export interface WsLike {
  send(data: string): void;
  close(): void;
  readyState: number;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: { code: number; reason: string }) => void) | null;
  onerror: (() => void) | null;
}

const WS_OPEN = 1;

export interface ClientHooks {
  onFrame(frame: StateFrame): void;
  onStatus(status: ConnectionStatus): void;
  onRtt?(rttMs: number): void;
}

interface Timers {
  now(): number;
  setInterval(fn: () => void, ms: number): unknown;
  clearInterval(id: unknown): void;
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(id: unknown): void;
}

const realTimers: Timers = {
  now: () => performance.now(),
  setInterval: (fn, ms) => setInterval(fn, ms),
  clearInterval: (id) => clearInterval(id as number),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (id) => clearTimeout(id as number),
};

export class BridgeClient {
  rttMs: number | null = null;

  private ws: WsLike | null = null;
  private pingTimer: unknown = null;
  private retryTimer: unknown = null;
  private attempts = 0;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly hooks: ClientHooks,
    private readonly makeSocket: (url: string) => WsLike = (u) =>
      new WebSocket(u) as unknown as WsLike,
    private readonly timers: Timers = realTimers,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.clearTimers();
    if (this.ws) {
      this.ws.onclose = null;
      this.ws.close();
      this.ws = null;
    }
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WS_OPEN;
  }

  // Ships one control sample; drops it silently when the socket is down
  // (a missed inbound frame means "no change" server-side).
  sendControl(sample: ControlSample, clientTimeMs: number): boolean {
    if (!this.connected) return false;
    this.ws!.send(
      controlMessage(sample.takeover, sample.steer, sample.accel, clientTimeMs),
    );
    return true;
  }

  private connect(): void {
    if (this.stopped) return;
    this.hooks.onStatus({ kind: "connecting" });
    const ws = this.makeSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.hooks.onStatus({ kind: "open" });
      this.pingTimer = this.timers.setInterval(() => {
        if (this.connected) this.ws!.send(pingMessage(this.timers.now()));
      }, PING_INTERVAL_MS);
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data !== "string") return;
      const frame = parseFrame(ev.data);
      if (frame === null) return;
      if (frame.type === "pong") {
        this.rttMs = this.timers.now() - frame.t;
        this.hooks.onRtt?.(this.rttMs);
        return;
      }
      this.hooks.onFrame(frame);
    };
    ws.onclose = (ev) => {
      this.clearTimers();
      this.ws = null;
      this.rttMs = null;
      if (this.stopped) return;
      if (ev.code === CLOSE_SINGLE_OPERATOR) {
        // someone else holds the takeover seat; poll politely
        this.hooks.onStatus({ kind: "rejected", detail: ev.reason });
        this.retryTimer = this.timers.setTimeout(
          () => this.connect(),
          REJECTED_RETRY_MS,
        );
        return;
      }
      this.hooks.onStatus({ kind: "closed", detail: ev.reason });
      const wait = BACKOFF_MS[Math.min(this.attempts, BACKOFF_MS.length - 1)]!;
      this.attempts += 1;
      this.retryTimer = this.timers.setTimeout(() => this.connect(), wait);
    };
    ws.onerror = () => {
      // onclose follows and owns the retry
    };
  }

  private clearTimers(): void {
    if (this.pingTimer !== null) {
      this.timers.clearInterval(this.pingTimer);
      this.pingTimer = null;
    }
    if (this.retryTimer !== null) {
      this.timers.clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
  }
}
