// Streaming strip charts drawn by hand on small canvases. Series hold a
// bounded history; null entries are gaps (disconnects) and render as gaps.

export interface StripSeries {
  label: string;
  color: string;
  data: (number | null)[];
  kind?: "line" | "points";
}

// The subset of CanvasRenderingContext2D the strips use; tests substitute
// a recording fake.
export interface StripCtx {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

export class Series {
  private buf: (number | null)[] = [];

  constructor(readonly capacity: number) {
    if (capacity < 1) throw new Error("capacity must be positive");
  }

  push(v: number | null): void {
    this.buf.push(v);
    if (this.buf.length > this.capacity) this.buf.shift();
  }

  values(): (number | null)[] {
    return this.buf;
  }

  get length(): number {
    return this.buf.length;
  }

  last(): number | null {
    return this.buf.length ? this.buf[this.buf.length - 1]! : null;
  }
}

// Rolling mean of a 0/1 flag over the last `window` samples; the live
// intervention-rate readout.
export class RollingRate {
  private flags: number[] = [];

  constructor(readonly window: number = 100) {}

  push(flag: boolean): void {
    this.flags.push(flag ? 1 : 0);
    if (this.flags.length > this.window) this.flags.shift();
  }

  rate(): number | null {
    if (this.flags.length === 0) return null;
    const sum = this.flags.reduce((a, b) => a + b, 0);
    return sum / this.flags.length;
  }
}

interface Range {
  lo: number;
  hi: number;
}

function dataRange(series: StripSeries[]): Range {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s.data) {
      if (v === null) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo === Infinity) return { lo: 0, hi: 1 };
  if (lo === hi) {
    // constant metric: keep it a visible flat line mid-strip
    const pad = Math.abs(lo) > 1e-12 ? Math.abs(lo) : 0.5;
    return { lo: lo - pad, hi: hi + pad };
  }
  return { lo, hi };
}

export function drawStrip(
  ctx: StripCtx,
  w: number,
  h: number,
  series: StripSeries[],
  opts: { lo?: number; hi?: number; background?: string } = {},
): void {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = opts.background ?? "#14181d";
  ctx.fillRect(0, 0, w, h);

  const auto = dataRange(series);
  const lo = opts.lo ?? auto.lo;
  const hi = opts.hi ?? auto.hi;
  const span = hi - lo || 1;
  const n = Math.max(...series.map((s) => s.data.length), 2);
  const toX = (i: number) => (i / (n - 1)) * (w - 8) + 4;
  const toY = (v: number) => h - 4 - ((v - lo) / span) * (h - 8);

  for (const s of series) {
    if (s.kind === "points") {
      ctx.fillStyle = s.color;
      s.data.forEach((v, i) => {
        if (v === null) return;
        ctx.beginPath();
        ctx.arc(toX(i), toY(v), 2.5, 0, 2 * Math.PI);
        ctx.fill();
      });
      continue;
    }
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let pen = false;
    s.data.forEach((v, i) => {
      if (v === null) {
        pen = false; // gap stays a gap
        return;
      }
      if (pen) ctx.lineTo(toX(i), toY(v));
      else ctx.moveTo(toX(i), toY(v));
      pen = true;
    });
    ctx.stroke();
  }

  ctx.font = "10px system-ui, sans-serif";
  let x = 6;
  for (const s of series) {
    ctx.fillStyle = s.color;
    const tail = s.data.length ? s.data[s.data.length - 1] : null;
    const txt = tail === null || tail === undefined
      ? s.label
      : `${s.label} ${fmt(tail)}`;
    ctx.fillText(txt, x, 12);
    x += txt.length * 6 + 10;
  }
}

function fmt(v: number): string {
  const a = Math.abs(v);
  if (a >= 100) return v.toFixed(0);
  if (a >= 1) return v.toFixed(2);
  return v.toPrecision(2);
}
