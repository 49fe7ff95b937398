/**
 * DOM wiring: builds the widgets, binds them to the control session and
 * repaints the strip charts once per animation frame.  All behavior lives
 * in the imported modules; this file is glue only.
 */

import { paintDecisionChart, paintRmsChart, paintXiChart, RenderScheduler } from "./charts.js";
import { ControlPanel } from "./controls.js";
import { ControlSession, SocketLike } from "./socket.js";
import { PanelStore } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/control`;
}

const store = new PanelStore();
// a browser WebSocket satisfies SocketLike at runtime; only the handler
// parameter variance keeps the structural check from seeing it
const session = new ControlSession(wsUrl(), store, (url) => new WebSocket(url) as unknown as SocketLike);
const controls = new ControlPanel(session, store);

const banner = el<HTMLDivElement>("banner");
const attenSlider = el<HTMLInputElement>("atten");
const attenValue = el<HTMLSpanElement>("atten-value");
const silenceInput = el<HTMLInputElement>("silence-below");
const dfOffInput = el<HTMLInputElement>("df-off-above");
const thresholdNote = el<HTMLSpanElement>("threshold-note");
const erbToggle = el<HTMLInputElement>("erb-enabled");
const dfToggle = el<HTMLInputElement>("df-enabled");
const estimatorSelect = el<HTMLSelectElement>("estimator");
const readout = el<HTMLPreElement>("config-readout");
const toasts = el<HTMLDivElement>("toasts");
const xiCanvas = el<HTMLCanvasElement>("xi-chart");
const decisionCanvas = el<HTMLCanvasElement>("decision-chart");
const rmsCanvas = el<HTMLCanvasElement>("rms-chart");

let editingThresholds = false;

function paint(): void {
  const s = store.get();
  banner.textContent =
    s.status === "connected" ? "" : s.status === "connecting" ? "connecting…" : "disconnected — retrying";
  banner.className = `banner ${s.status}`;

  if (s.config) {
    // the readout always shows the acked config; widgets show it too
    // unless the user has an edit in flight (pending marks the widget)
    readout.textContent = JSON.stringify(s.config, null, 2);
    if (!s.pending.has("atten")) {
      attenSlider.value = String(s.config.atten_db);
    }
    attenValue.textContent = `${attenSlider.value} dB`;
    if (!s.pending.has("thresholds") && !editingThresholds) {
      silenceInput.value = String(s.config.silence_below_db);
      dfOffInput.value = String(s.config.df_off_above_db);
    }
    if (!s.pending.has("stages")) {
      erbToggle.checked = s.config.erb_enabled;
      dfToggle.checked = s.config.df_enabled;
    }
    if (!s.pending.has("estimator")) {
      estimatorSelect.value = s.config.estimator;
    }
  }
  for (const name of ["atten", "thresholds", "stages", "estimator"]) {
    const node = document.querySelector(`[data-control="${name}"]`);
    node?.classList.toggle("pending", s.pending.has(name));
  }

  const xiCtx = xiCanvas.getContext("2d")!;
  paintXiChart(
    xiCtx,
    s.meters,
    {
      loDb: -15,
      hiDb: 35,
      silenceBelowDb: s.config?.silence_below_db ?? null,
      dfOffAboveDb: s.config?.df_off_above_db ?? null,
    },
    xiCanvas.width,
    xiCanvas.height,
  );
  paintDecisionChart(decisionCanvas.getContext("2d")!, s.meters, decisionCanvas.width, decisionCanvas.height);
  paintRmsChart(rmsCanvas.getContext("2d")!, s.meters, rmsCanvas.width, rmsCanvas.height);

  for (const toast of store.takeToasts()) {
    const node = document.createElement("div");
    node.className = `toast ${toast.kind}`;
    node.textContent = toast.text;
    toasts.appendChild(node);
    setTimeout(() => node.remove(), 5000);
  }
}

const scheduler = new RenderScheduler(paint, (cb) => requestAnimationFrame(cb));
store.subscribe(() => scheduler.invalidate());

attenSlider.addEventListener("input", () => {
  attenValue.textContent = `${attenSlider.value} dB`;
});
attenSlider.addEventListener("change", () => {
  // one message per release; the rate limiter enforces <= 5 msg/s anyway
  controls.setAtten(Number(attenSlider.value));
});

function submitThresholds(): void {
  editingThresholds = false;
  const result = controls.setThresholds(Number(silenceInput.value), Number(dfOffInput.value));
  thresholdNote.textContent = result.sent ? "" : result.reason ?? "";
}
for (const input of [silenceInput, dfOffInput]) {
  input.addEventListener("focus", () => {
    editingThresholds = true;
  });
  input.addEventListener("change", submitThresholds);
}

for (const toggle of [erbToggle, dfToggle]) {
  toggle.addEventListener("change", () => {
    controls.setStages(erbToggle.checked, dfToggle.checked);
  });
}
estimatorSelect.addEventListener("change", () => {
  controls.setEstimator(estimatorSelect.value as "passthrough" | "blind");
});

session.connect();
