import { BridgeClient } from "./client";
import type { ConnectionStatus } from "./client";
import { RollingRate, Series, drawStrip } from "./charts";
import { InputTracker, readGamepads } from "./input";
import { FrameMailbox } from "./mailbox";
import { drawScene } from "./render";
import type { Viewport } from "./render";
import type { ScenePayload, StateFrame } from "./protocol";

const CONTROL_SEND_MS = 50; // 20 Hz while the dead-man switch is held
const STALE_FRAME_MS = 1000;
const CHART_POINTS = 600;
const RATE_WINDOW_TICKS = 100;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function ctx2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  return ctx;
}

const sceneCanvas = el<HTMLCanvasElement>("scene");
const sceneCtx = ctx2d(sceneCanvas);
const rateCtx = ctx2d(el<HTMLCanvasElement>("chart-rate"));
const lossCtx = ctx2d(el<HTMLCanvasElement>("chart-loss"));
const evalCtx = ctx2d(el<HTMLCanvasElement>("chart-eval"));

const statusEl = el<HTMLSpanElement>("status");
const rttEl = el<HTMLSpanElement>("rtt");
const tickEl = el<HTMLSpanElement>("tick");
const modeEl = el<HTMLSpanElement>("mode");
const takeoverEl = el<HTMLDivElement>("takeover");
const overlayEl = el<HTMLDivElement>("overlay");

const mailbox = new FrameMailbox();
const input = new InputTracker();
const rolling = new RollingRate(RATE_WINDOW_TICKS);

const rateSeries = new Series(CHART_POINTS);
const lossSeries = {
  proxy: new Series(CHART_POINTS),
  td: new Series(CHART_POINTS),
  policy: new Series(CHART_POINTS),
  bc: new Series(CHART_POINTS),
};
const evalSeries = new Series(CHART_POINTS);

let scene: ScenePayload | null = null;
let lastEvalStep: number | null = null;
let connection: ConnectionStatus = { kind: "connecting" };

function pushGap(): void {
  rateSeries.push(null);
  for (const s of Object.values(lossSeries)) s.push(null);
  evalSeries.push(null);
}

function ingest(frame: StateFrame): void {
  if (frame.scene && frame.scene.id !== scene?.id) scene = frame.scene;

  rolling.push(frame.gate.I);
  rateSeries.push(rolling.rate());

  const l = frame.losses;
  lossSeries.proxy.push(l.loss_proxy ?? null);
  lossSeries.td.push(l.loss_td ?? null);
  lossSeries.policy.push(l.loss_policy ?? null);
  lossSeries.bc.push(l.loss_bc ?? null);

  const step = frame.eval.checkpoint_step;
  const success = frame.eval.success_rate;
  if (typeof step === "number" && typeof success === "number" && step !== lastEvalStep) {
    lastEvalStep = step;
    evalSeries.push(success);
  } else {
    evalSeries.push(null);
  }
}

// -- network ------------------------------------------------------------

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/bridge`;

const client = new BridgeClient(wsUrl, {
  onFrame: (frame) => mailbox.put(frame, performance.now()),
  onStatus: (status) => {
    if (status.kind !== "open" && connection.kind === "open") pushGap();
    connection = status;
  },
});
client.start();

// -- input --------------------------------------------------------------

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) {
    if (input.keyDown(ev.code)) ev.preventDefault();
    return;
  }
  if (input.keyDown(ev.code)) ev.preventDefault();
});
window.addEventListener("keyup", (ev) => {
  if (input.keyUp(ev.code)) ev.preventDefault();
});
window.addEventListener("blur", () => input.blur());

setInterval(() => {
  input.setGamepad(
    typeof navigator.getGamepads === "function"
      ? readGamepads(navigator.getGamepads())
      : null,
  );
  const sample = input.sample();
  if (sample !== null) client.sendControl(sample, Date.now());
}, CONTROL_SEND_MS);

// -- render loop ----------------------------------------------------------

function fitCanvas(canvas: HTMLCanvasElement): void {
  const dpr = window.devicePixelRatio || 1;
  const rect = canvas.getBoundingClientRect();
  const w = Math.round(rect.width * dpr);
  const h = Math.round(rect.height * dpr);
  if (canvas.width !== w || canvas.height !== h) {
    canvas.width = w;
    canvas.height = h;
  }
}

function overlayText(): string | null {
  if (connection.kind === "rejected") {
    return "another operator holds the session; retrying";
  }
  if (connection.kind !== "open") return "connecting to bridge…";
  if (mailbox.ageMs(performance.now()) > STALE_FRAME_MS) {
    return "connection degraded: no fresh state";
  }
  return null;
}

function paint(): void {
  const fresh = mailbox.takeFresh();
  if (fresh) ingest(fresh);

  const frame = mailbox.latest();
  fitCanvas(sceneCanvas);
  if (frame) {
    const range = scene?.lidar_range ?? 50;
    const view: Viewport = {
      cx: frame.ego.x,
      cy: frame.ego.y,
      scale: Math.min(sceneCanvas.width, sceneCanvas.height) / (2.2 * range),
      w: sceneCanvas.width,
      h: sceneCanvas.height,
    };
    drawScene(sceneCtx, frame, scene, view);

    tickEl.textContent = String(frame.tick);
    modeEl.textContent = frame.gate.mode;
    const engaged = frame.gate.I;
    takeoverEl.classList.toggle("active", engaged);
    takeoverEl.textContent = engaged
      ? "TAKEOVER"
      : input.takeoverHeld
        ? "ARMED"
        : "autonomous";
    document.body.classList.toggle("intervening", engaged);
  }

  statusEl.textContent = connection.kind;
  statusEl.className = `dot ${connection.kind}`;
  rttEl.textContent = client.rttMs === null ? "–" : `${client.rttMs.toFixed(0)} ms`;

  const text = overlayText();
  overlayEl.textContent = text ?? "";
  overlayEl.classList.toggle("visible", text !== null);

  for (const c of [rateCtx, lossCtx, evalCtx]) fitCanvas(c.canvas);
  drawStrip(rateCtx, rateCtx.canvas.width, rateCtx.canvas.height, [
    { label: "intervention rate", color: "#f85149", data: rateSeries.values() },
  ], { lo: 0, hi: 1 });
  drawStrip(lossCtx, lossCtx.canvas.width, lossCtx.canvas.height, [
    { label: "proxy", color: "#e2b93b", data: lossSeries.proxy.values() },
    { label: "td", color: "#58a6ff", data: lossSeries.td.values() },
    { label: "policy", color: "#bc8cff", data: lossSeries.policy.values() },
    { label: "bc", color: "#3fb950", data: lossSeries.bc.values() },
  ]);
  drawStrip(evalCtx, evalCtx.canvas.width, evalCtx.canvas.height, [
    { label: "eval success", color: "#3fb950", data: evalSeries.values(), kind: "points" },
  ], { lo: 0, hi: 1 });

  requestAnimationFrame(paint);
}

requestAnimationFrame(paint);
