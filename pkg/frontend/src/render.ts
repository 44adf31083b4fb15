import type {
  LaneGeometry,
  ScenePayload,
  StateFrame,
} from "./protocol";

// Top-down scene painter. World coordinates are y-up; the canvas is y-down,
// so every point goes through worldToScreen rather than a context transform
// (keeps line widths and text unmirrored).

export interface Viewport {
  cx: number; // world point at the canvas center
  cy: number;
  scale: number; // px per meter
  w: number;
  h: number;
}

// Subset of CanvasRenderingContext2D used by the painter; tests drive it
// with a recording fake.
export interface SceneCtx {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  setLineDash(segments: number[]): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
}

export function worldToScreen(v: Viewport, x: number, y: number): [number, number] {
  return [v.w / 2 + (x - v.cx) * v.scale, v.h / 2 - (y - v.cy) * v.scale];
}

type Pt = [number, number];

// Centerline shifted laterally (positive left of travel), miter joins;
// matches the geometry the simulator rays actually hit.
export function offsetPolyline(points: Pt[], offset: number): Pt[] {
  const n = points.length;
  if (n < 2) return points.slice();
  const dirs: Pt[] = [];
  for (let i = 0; i < n - 1; i++) {
    const dx = points[i + 1]![0] - points[i]![0];
    const dy = points[i + 1]![1] - points[i]![1];
    const len = Math.hypot(dx, dy) || 1;
    dirs.push([dx / len, dy / len]);
  }
  const normals: Pt[] = dirs.map(([dx, dy]) => [-dy, dx]);
  const out: Pt[] = [];
  for (let i = 0; i < n; i++) {
    let nx: number;
    let ny: number;
    if (i === 0) [nx, ny] = normals[0]!;
    else if (i === n - 1) [nx, ny] = normals[n - 2]!;
    else {
      nx = normals[i - 1]![0] + normals[i]![0];
      ny = normals[i - 1]![1] + normals[i]![1];
      const len = Math.hypot(nx, ny);
      if (len < 1e-9) {
        nx = normals[i]![0];
        ny = normals[i]![1];
      } else {
        nx /= len;
        ny /= len;
      }
    }
    out.push([points[i]![0] + offset * nx, points[i]![1] + offset * ny]);
  }
  return out;
}

const COLORS = {
  ground: "#0d1117",
  asphalt: "#1f242b",
  yellowSolid: "#e2b93b",
  whiteBroken: "#aab2bd",
  destination: "#3fb950",
  obstacle: "#8b949e",
  traffic: "#58a6ff",
  egoAuto: "#e6edf3",
  egoTakeover: "#f85149",
  lidarRay: "#3fb950",
} as const;

function tracePoly(ctx: SceneCtx, view: Viewport, pts: Pt[], close: boolean): void {
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    const [sx, sy] = worldToScreen(view, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  if (close) ctx.closePath();
}

function strokeBoundary(
  ctx: SceneCtx,
  view: Viewport,
  pts: Pt[],
  kind: string,
): void {
  if (kind === "none") return;
  if (kind === "yellow-solid") {
    ctx.strokeStyle = COLORS.yellowSolid;
    ctx.setLineDash([]);
  } else {
    ctx.strokeStyle = COLORS.whiteBroken;
    ctx.setLineDash([10, 8]);
  }
  ctx.lineWidth = 2;
  tracePoly(ctx, view, pts, false);
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawLane(ctx: SceneCtx, view: Viewport, lane: LaneGeometry): void {
  const left = offsetPolyline(lane.points, lane.width / 2);
  const right = offsetPolyline(lane.points, -lane.width / 2);
  ctx.fillStyle = COLORS.asphalt;
  tracePoly(ctx, view, right.concat(left.slice().reverse()), true);
  ctx.fill();
  strokeBoundary(ctx, view, left, lane.boundary_left);
  strokeBoundary(ctx, view, right, lane.boundary_right);
}

function drawBody(
  ctx: SceneCtx,
  view: Viewport,
  x: number,
  y: number,
  heading: number,
  length: number,
  width: number,
  color: string,
  nose: boolean,
): void {
  const c = Math.cos(heading);
  const s = Math.sin(heading);
  const hl = length / 2;
  const hw = width / 2;
  const corners: Pt[] = [
    [x + c * hl - s * hw, y + s * hl + c * hw],
    [x + c * hl + s * hw, y + s * hl - c * hw],
    [x - c * hl + s * hw, y - s * hl - c * hw],
    [x - c * hl - s * hw, y - s * hl + c * hw],
  ];
  ctx.fillStyle = color;
  tracePoly(ctx, view, corners, true);
  ctx.fill();
  if (nose) {
    const [nx, ny] = worldToScreen(view, x + c * hl * 1.3, y + s * hl * 1.3);
    ctx.beginPath();
    ctx.arc(nx, ny, 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export const LIDAR_RAYS = 60;

function drawLidarFan(ctx: SceneCtx, view: Viewport, frame: StateFrame, range: number): void {
  const { x, y, heading } = frame.ego;
  const [ox, oy] = worldToScreen(view, x, y);
  const n = frame.lidar.length;
  ctx.strokeStyle = COLORS.lidarRay;
  ctx.lineWidth = 1;
  ctx.globalAlpha = 0.25;
  for (let i = 0; i < n; i++) {
    const frac = frame.lidar[i] ?? 1;
    const ang = heading + (2 * Math.PI * i) / n; // ray 0 forward, then CCW
    const [px, py] = worldToScreen(
      view,
      x + Math.cos(ang) * frac * range,
      y + Math.sin(ang) * frac * range,
    );
    ctx.beginPath();
    ctx.moveTo(ox, oy);
    ctx.lineTo(px, py);
    ctx.stroke();
  }
  // brighten actual returns so obstacles pop out of the fan
  ctx.globalAlpha = 0.9;
  ctx.fillStyle = COLORS.lidarRay;
  for (let i = 0; i < n; i++) {
    const frac = frame.lidar[i] ?? 1;
    if (frac >= 1) continue;
    const ang = heading + (2 * Math.PI * i) / n;
    const [px, py] = worldToScreen(
      view,
      x + Math.cos(ang) * frac * range,
      y + Math.sin(ang) * frac * range,
    );
    ctx.beginPath();
    ctx.arc(px, py, 1.5, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.globalAlpha = 1;
}

export function drawScene(
  ctx: SceneCtx,
  frame: StateFrame,
  scene: ScenePayload | null,
  view: Viewport,
): void {
  ctx.globalAlpha = 1;
  ctx.setLineDash([]);
  ctx.fillStyle = COLORS.ground;
  ctx.fillRect(0, 0, view.w, view.h);

  if (scene) {
    for (const lane of scene.lanes) drawLane(ctx, view, lane);

    const d = scene.destination;
    const [dx, dy] = worldToScreen(view, d.x, d.y);
    ctx.strokeStyle = COLORS.destination;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(dx, dy, scene.destination_radius * view.scale, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.fillStyle = COLORS.destination;
    ctx.beginPath();
    ctx.arc(dx, dy, 3, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.fillStyle = COLORS.obstacle;
  for (const o of frame.obstacles) {
    const [ox, oy] = worldToScreen(view, o.x, o.y);
    ctx.beginPath();
    ctx.arc(ox, oy, o.radius * view.scale, 0, 2 * Math.PI);
    ctx.fill();
  }

  const bodyL = scene?.body_length ?? 4.0;
  const bodyW = scene?.body_width ?? 1.8;
  for (const t of frame.traffic) {
    drawBody(ctx, view, t.x, t.y, t.heading, bodyL, bodyW, COLORS.traffic, false);
  }

  drawLidarFan(ctx, view, frame, scene?.lidar_range ?? 50.0);

  drawBody(
    ctx,
    view,
    frame.ego.x,
    frame.ego.y,
    frame.ego.heading,
    bodyL,
    bodyW,
    frame.gate.I ? COLORS.egoTakeover : COLORS.egoAuto,
    true,
  );
}
