/**
 * Panel state store.  Every displayed value traces back to a ServerEvent:
 * the authoritative config is always the last config_ack; user edits only
 * set pending flags until the ack (or error) arrives.  Meter history is a
 * rolling window sized for 30 s at 10 Hz and is cleared on disconnect so
 * stale telemetry is never rendered.
 */

import type { ConfigAckEvent, EngineConfigView, MeterEvent, ServerEvent } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export const METER_HISTORY = 300;

export interface Toast {
  kind: "error" | "info";
  text: string;
}

export interface PanelState {
  status: ConnectionStatus;
  config: EngineConfigView | null;
  pending: Set<string>;
  meters: MeterEvent[];
  toasts: Toast[];
  lastError: string | null;
}

export type Listener = (state: PanelState) => void;

export class PanelStore {
  private state: PanelState = {
    status: "disconnected",
    config: null,
    pending: new Set(),
    meters: [],
    toasts: [],
    lastError: null,
  };
  private listeners: Listener[] = [];

  get(): PanelState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  setStatus(status: ConnectionStatus): void {
    this.state.status = status;
    if (status !== "connected") {
      // a dead link must not keep painting old telemetry
      this.state.meters = [];
      this.state.pending.clear();
    }
    this.emit();
  }

  markPending(control: string): void {
    this.state.pending.add(control);
    this.emit();
  }

  applyServerEvent(event: ServerEvent): void {
    switch (event.type) {
      case "config_ack":
        this.state.config = (event as ConfigAckEvent).config;
        this.state.pending.clear();
        break;
      case "meter": {
        const meters = this.state.meters;
        meters.push(event as MeterEvent);
        if (meters.length > METER_HISTORY) meters.splice(0, meters.length - METER_HISTORY);
        break;
      }
      case "error":
        this.state.lastError = event.message;
        this.state.pending.clear();
        this.state.toasts.push({ kind: "error", text: `${event.code}: ${event.message}` });
        break;
    }
    this.emit();
  }

  takeToasts(): Toast[] {
    const out = this.state.toasts;
    this.state.toasts = [];
    return out;
  }
}
