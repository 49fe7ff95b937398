/**
 * Strip-chart models and canvas painters for the meter history.
 *
 * The geometry functions are pure (meters in, polylines/segments out) so
 * the chart behavior is testable without a canvas; painting is a thin
 * layer on top.  Rendering is batched: state changes only mark the panel
 * dirty and one animation-frame callback repaints everything.
 */

import type { Decision, MeterEvent } from "./protocol.js";
import { METER_HISTORY } from "./state.js";

export interface Point {
  x: number;
  y: number;
}

export interface DecisionSegment {
  decision: Decision;
  x0: number;
  x1: number;
}

export const DECISION_COLORS: Record<Decision, string> = {
  silence: "#5b6470",
  erb_only: "#caa53d",
  full: "#3f9d63",
};

export function yForDb(db: number, loDb: number, hiDb: number, height: number): number {
  const clamped = Math.min(Math.max(db, loDb), hiDb);
  return height * (1 - (clamped - loDb) / (hiDb - loDb));
}

/** Polyline for one numeric meter field over the rolling history window. */
export function tracePolyline(
  meters: MeterEvent[],
  field: "xi_db" | "in_rms_db" | "out_rms_db" | "mean_gain" | "df_delta_db",
  width: number,
  height: number,
  loDb: number,
  hiDb: number,
): Point[] {
  const n = meters.length;
  if (n === 0) return [];
  const dx = width / Math.max(METER_HISTORY - 1, 1);
  const x0 = width - (n - 1) * dx;
  return meters.map((m, i) => ({
    x: x0 + i * dx,
    y: yForDb(m[field], loDb, hiDb, height),
  }));
}

/** Contiguous same-decision runs mapped to x ranges (the colored bands). */
export function decisionSegments(meters: MeterEvent[], width: number): DecisionSegment[] {
  const n = meters.length;
  if (n === 0) return [];
  const dx = width / Math.max(METER_HISTORY - 1, 1);
  const x0 = width - (n - 1) * dx;
  const segments: DecisionSegment[] = [];
  let runStart = 0;
  for (let i = 1; i <= n; i++) {
    if (i === n || meters[i].decision !== meters[runStart].decision) {
      segments.push({
        decision: meters[runStart].decision,
        x0: x0 + runStart * dx,
        x1: x0 + (i - 1) * dx + (i === n ? dx : 0),
      });
      runStart = i;
    }
  }
  return segments;
}

export function decisionsPresent(segments: DecisionSegment[]): Set<Decision> {
  return new Set(segments.map((s) => s.decision));
}

export type RafLike = (cb: () => void) => unknown;

/** Coalesces any number of invalidations per frame into one repaint. */
export class RenderScheduler {
  renders = 0;
  private dirty = false;

  constructor(private paint: () => void, private raf: RafLike) {}

  invalidate(): void {
    if (this.dirty) return;
    this.dirty = true;
    this.raf(() => {
      this.dirty = false;
      this.renders += 1;
      this.paint();
    });
  }
}

// ---- canvas painting (thin, untested glue over the pure model) ----

export interface XiChartConfig {
  loDb: number;
  hiDb: number;
  silenceBelowDb: number | null;
  dfOffAboveDb: number | null;
}

export function paintXiChart(
  ctx: CanvasRenderingContext2D,
  meters: MeterEvent[],
  cfg: XiChartConfig,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#11151a";
  ctx.fillRect(0, 0, width, height);
  for (const [value, color] of [
    [cfg.silenceBelowDb, "#b45454"],
    [cfg.dfOffAboveDb, "#caa53d"],
  ] as const) {
    if (value === null) continue;
    const y = yForDb(value, cfg.loDb, cfg.hiDb, height);
    ctx.strokeStyle = color;
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(width, y);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  strokePolyline(ctx, tracePolyline(meters, "xi_db", width, height, cfg.loDb, cfg.hiDb), "#6fb3e0");
}

export function paintDecisionChart(
  ctx: CanvasRenderingContext2D,
  meters: MeterEvent[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#11151a";
  ctx.fillRect(0, 0, width, height);
  for (const seg of decisionSegments(meters, width)) {
    ctx.fillStyle = DECISION_COLORS[seg.decision];
    ctx.fillRect(seg.x0, 0, Math.max(seg.x1 - seg.x0, 1), height);
  }
}

export function paintRmsChart(
  ctx: CanvasRenderingContext2D,
  meters: MeterEvent[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#11151a";
  ctx.fillRect(0, 0, width, height);
  strokePolyline(ctx, tracePolyline(meters, "in_rms_db", width, height, -80, 0), "#9aa4af");
  strokePolyline(ctx, tracePolyline(meters, "out_rms_db", width, height, -80, 0), "#3f9d63");
}

function strokePolyline(ctx: CanvasRenderingContext2D, points: Point[], color: string): void {
  if (points.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(points[0].x, points[0].y);
  for (let i = 1; i < points.length; i++) ctx.lineTo(points[i].x, points[i].y);
  ctx.stroke();
}
