/**
 * Control-socket session: connects, re-requests the config, subscribes to
 * meters, feeds every server event into the store, and retries with
 * exponential backoff when the service drops.  The WebSocket constructor
 * and timer functions are injectable so every behavior is testable against
 * a mocked server.
 */

import type { ControlMessage } from "./protocol.js";
import { parseServerEvent } from "./protocol.js";
import { PanelStore } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  meterHz?: number;
  backoffInitialMs?: number;
  backoffMaxMs?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export class ControlSession {
  readonly store: PanelStore;
  private readonly url: string;
  private readonly factory: SocketFactory;
  private readonly meterHz: number;
  private readonly backoffInitialMs: number;
  private readonly backoffMaxMs: number;
  private readonly setTimeoutFn: (fn: () => void, ms: number) => unknown;
  private socket: SocketLike | null = null;
  private backoffMs: number;
  private closed = false;

  constructor(url: string, store: PanelStore, factory: SocketFactory, opts: SessionOptions = {}) {
    this.url = url;
    this.store = store;
    this.factory = factory;
    this.meterHz = opts.meterHz ?? 10;
    this.backoffInitialMs = opts.backoffInitialMs ?? 500;
    this.backoffMaxMs = opts.backoffMaxMs ?? 8000;
    this.setTimeoutFn = opts.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
    this.backoffMs = this.backoffInitialMs;
  }

  connect(): void {
    if (this.closed) return;
    this.store.setStatus("connecting");
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.backoffMs = this.backoffInitialMs;
      this.store.setStatus("connected");
      // render the real config and start the meter stream
      this.send({ type: "get_config" });
      this.send({ type: "subscribe", meter_hz: this.meterHz });
    };
    sock.onmessage = (ev) => {
      const event = parseServerEvent(ev.data);
      if (event) this.store.applyServerEvent(event);
    };
    const onDown = () => {
      if (this.socket !== sock) return; // superseded
      this.socket = null;
      this.store.setStatus("disconnected");
      if (!this.closed) {
        this.setTimeoutFn(() => this.connect(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, this.backoffMaxMs);
      }
    };
    sock.onclose = onDown;
    sock.onerror = onDown;
  }

  send(message: ControlMessage): boolean {
    if (!this.socket || this.store.get().status !== "connected") return false;
    this.socket.send(JSON.stringify(message));
    return true;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
