/**
 * Wire protocol spoken by the control service: JSON objects, one per
 * WebSocket message, snake_case fields, a `type` discriminator.  Server
 * events also carry `proto`.
 */

export const PROTO_VERSION = 1;

export type EstimatorKind = "passthrough" | "blind" | "oracle";
export type Decision = "silence" | "erb_only" | "full";

export interface EngineConfigView {
  atten_db: number;
  silence_below_db: number;
  df_off_above_db: number;
  erb_enabled: boolean;
  df_enabled: boolean;
  estimator: EstimatorKind;
  sample_rate_hz: number;
  latency_ms: number;
}

export interface MeterEvent {
  proto: number;
  type: "meter";
  frame_index: number;
  xi_db: number;
  decision: Decision;
  mean_gain: number;
  df_delta_db: number;
  in_rms_db: number;
  out_rms_db: number;
}

export interface ConfigAckEvent {
  proto: number;
  type: "config_ack";
  config: EngineConfigView;
}

export interface ErrorEvent {
  proto: number;
  type: "error";
  code: string;
  message: string;
}

export type ServerEvent = MeterEvent | ConfigAckEvent | ErrorEvent;

export type ControlMessage =
  | { type: "set_atten"; db: number }
  | { type: "set_thresholds"; silence_below_db: number; df_off_above_db: number }
  | { type: "set_stages"; erb: boolean; df: boolean }
  | { type: "set_estimator"; kind: Exclude<EstimatorKind, "oracle"> }
  | { type: "get_config" }
  | { type: "subscribe"; meter_hz: number };

/** Parse one raw socket payload; null for anything malformed or unknown. */
export function parseServerEvent(raw: string): ServerEvent | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const obj = data as Record<string, unknown>;
  switch (obj.type) {
    case "meter":
      if (typeof obj.xi_db === "number" && typeof obj.frame_index === "number") {
        return obj as unknown as MeterEvent;
      }
      return null;
    case "config_ack":
      if (typeof obj.config === "object" && obj.config !== null) {
        return obj as unknown as ConfigAckEvent;
      }
      return null;
    case "error":
      if (typeof obj.message === "string") return obj as unknown as ErrorEvent;
      return null;
    default:
      return null;
  }
}

/** Client-side mirror of the GateThresholds invariant. */
export function thresholdsValid(silenceBelow: number, dfOffAbove: number): boolean {
  return (
    Number.isFinite(silenceBelow) &&
    Number.isFinite(dfOffAbove) &&
    silenceBelow < dfOffAbove &&
    silenceBelow >= -15 &&
    dfOffAbove <= 35
  );
}

/** Client-side mirror of the AttenLimit invariant. */
export function attenValid(db: number): boolean {
  return Number.isFinite(db) && db >= 0;
}
