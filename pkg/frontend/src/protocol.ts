// Message shapes for the /bridge socket. Outbound (server to client) frames
// are "state" and "pong"; we send "control" and "ping". Anything the server
// does not recognize from us closes the socket with code 4000, so the only
// messages ever constructed here are the two legal inbound kinds.

export interface EgoPose {
  x: number;
  y: number;
  heading: number;
  speed: number;
}

export interface TrafficPose {
  x: number;
  y: number;
  heading: number;
}

export interface ObstacleDisc {
  x: number;
  y: number;
  radius: number;
}

export interface LaneGeometry {
  id: string;
  width: number;
  boundary_left: string;
  boundary_right: string;
  points: [number, number][];
}

// Static per-scene payload piggybacked on every state frame; clients rebuild
// their road layer only when `id` changes.
export interface ScenePayload {
  id: string;
  lanes: LaneGeometry[];
  destination: { x: number; y: number; heading: number };
  destination_radius: number;
  lidar_range: number;
  body_length: number;
  body_width: number;
}

export interface EvalSnapshot {
  checkpoint_step?: number;
  success_rate?: number;
  out_rate?: number;
  timeout_rate?: number;
  crash_rate?: number;
  [key: string]: unknown;
}

export interface StateFrame {
  type: "state";
  tick: number;
  ego: EgoPose;
  traffic: TrafficPose[];
  obstacles: ObstacleDisc[];
  lidar: number[];
  gate: { mode: string; I: boolean };
  losses: Record<string, number>;
  eval: EvalSnapshot;
  scene?: ScenePayload;
}

export interface PongFrame {
  type: "pong";
  t: number;
  server_time_ms?: number;
}

export interface ControlFrame {
  type: "control";
  takeover: boolean;
  steer: number;
  accel: number;
  client_time_ms: number;
}

export interface PingFrame {
  type: "ping";
  t: number;
}

export type InboundFrame = StateFrame | PongFrame;

export function clamp(v: number, lo = -1, hi = 1): number {
  if (!Number.isFinite(v)) return 0;
  return Math.min(hi, Math.max(lo, v));
}

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

// Defensive parse: a malformed or unknown frame yields null and is dropped,
// never an exception out of the socket handler.
export function parseFrame(raw: string): InboundFrame | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  if (m.type === "pong" && isNum(m.t)) {
    return m as unknown as PongFrame;
  }
  if (m.type !== "state") return null;
  const ego = m.ego as Record<string, unknown> | undefined;
  const gate = m.gate as Record<string, unknown> | undefined;
  if (
    !isNum(m.tick) ||
    !ego || !isNum(ego.x) || !isNum(ego.y) ||
    !isNum(ego.heading) || !isNum(ego.speed) ||
    !Array.isArray(m.lidar) ||
    !gate || typeof gate.mode !== "string"
  ) {
    return null;
  }
  const f = m as unknown as StateFrame;
  f.gate.I = Boolean(gate.I);
  if (!Array.isArray(f.traffic)) f.traffic = [];
  if (!Array.isArray(f.obstacles)) f.obstacles = [];
  if (typeof f.losses !== "object" || f.losses === null) f.losses = {};
  if (typeof f.eval !== "object" || f.eval === null) f.eval = {};
  return f;
}

export function controlMessage(
  takeover: boolean,
  steer: number,
  accel: number,
  clientTimeMs: number,
): string {
  const frame: ControlFrame = {
    type: "control",
    takeover,
    steer: clamp(steer),
    accel: clamp(accel),
    client_time_ms: Math.round(clientTimeMs),
  };
  return JSON.stringify(frame);
}

export function pingMessage(t: number): string {
  const frame: PingFrame = { type: "ping", t };
  return JSON.stringify(frame);
}
