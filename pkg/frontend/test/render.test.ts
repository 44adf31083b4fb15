import { describe, expect, it } from "vitest";
import {
  drawScene,
  offsetPolyline,
  worldToScreen,
} from "../src/render";
import type { SceneCtx, Viewport } from "../src/render";
import type { ScenePayload, StateFrame } from "../src/protocol";

interface Op {
  op: string;
  args: unknown[];
  alpha: number;
  fillStyle: string;
}

function recordingCtx(): { ctx: SceneCtx; ops: Op[] } {
  const ops: Op[] = [];
  const state = { alpha: 1, fillStyle: "" };
  const rec = (op: string) => (...args: unknown[]) => {
    ops.push({ op, args, alpha: state.alpha, fillStyle: state.fillStyle });
  };
  const ctx = {
    clearRect: rec("clearRect"),
    fillRect: rec("fillRect"),
    beginPath: rec("beginPath"),
    moveTo: rec("moveTo"),
    lineTo: rec("lineTo"),
    closePath: rec("closePath"),
    arc: rec("arc"),
    stroke: rec("stroke"),
    fill: rec("fill"),
    setLineDash: rec("setLineDash"),
    strokeStyle: "",
    lineWidth: 0,
    get globalAlpha() {
      return state.alpha;
    },
    set globalAlpha(v: number) {
      state.alpha = v;
    },
    get fillStyle() {
      return state.fillStyle;
    },
    set fillStyle(v: string) {
      state.fillStyle = v;
    },
  } as unknown as SceneCtx;
  return { ctx, ops };
}

const view: Viewport = { cx: 0, cy: 0, scale: 5, w: 400, h: 300 };

function makeFrame(overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    type: "state",
    tick: 7,
    ego: { x: 0, y: 0, heading: 0, speed: 3 },
    traffic: [],
    obstacles: [],
    lidar: Array(60).fill(1.0),
    gate: { mode: "live", I: false },
    losses: {},
    eval: {},
    ...overrides,
  };
}

function makeScene(): ScenePayload {
  return {
    id: "train/0",
    lanes: [
      {
        id: "a",
        width: 7,
        boundary_left: "yellow-solid",
        boundary_right: "white-broken",
        points: [
          [0, 0],
          [50, 0],
          [100, 10],
        ],
      },
    ],
    destination: { x: 100, y: 10, heading: 0 },
    destination_radius: 5,
    lidar_range: 50,
    body_length: 4,
    body_width: 1.8,
  };
}

describe("worldToScreen", () => {
  it("centers the viewport and flips y", () => {
    expect(worldToScreen(view, 0, 0)).toEqual([200, 150]);
    expect(worldToScreen(view, 10, 0)).toEqual([250, 150]);
    expect(worldToScreen(view, 0, 10)).toEqual([200, 100]); // world up is screen up
  });
});

describe("offsetPolyline", () => {
  it("shifts a straight east-bound line to its left (+y)", () => {
    const out = offsetPolyline(
      [
        [0, 0],
        [10, 0],
      ],
      2,
    );
    expect(out).toEqual([
      [0, 2],
      [10, 2],
    ]);
  });

  it("mitres interior corners with the averaged normal", () => {
    const out = offsetPolyline(
      [
        [0, 0],
        [10, 0],
        [10, 10],
      ],
      1,
    );
    const mid = out[1]!;
    // 90 degree left turn: averaged normal points (-1, 1)/sqrt(2)
    expect(mid[0]).toBeCloseTo(10 - Math.SQRT1_2);
    expect(mid[1]).toBeCloseTo(Math.SQRT1_2);
  });

  it("survives a degenerate 180 degree reversal", () => {
    const out = offsetPolyline(
      [
        [0, 0],
        [10, 0],
        [0, 0],
      ],
      1,
    );
    expect(out).toHaveLength(3);
    for (const p of out) {
      expect(Number.isFinite(p[0])).toBe(true);
      expect(Number.isFinite(p[1])).toBe(true);
    }
  });
});

describe("drawScene", () => {
  it("renders a frame with no scene payload without error", () => {
    const { ctx } = recordingCtx();
    expect(() => drawScene(ctx, makeFrame(), null, view)).not.toThrow();
  });

  it("renders an empty map (no traffic, no obstacles) without error", () => {
    const { ctx, ops } = recordingCtx();
    const scene = makeScene();
    scene.lanes = [];
    drawScene(ctx, makeFrame(), scene, view);
    expect(ops.some((o) => o.op === "fillRect")).toBe(true); // ground painted
  });

  it("draws exactly 60 lidar fan rays", () => {
    const { ctx, ops } = recordingCtx();
    drawScene(ctx, makeFrame(), makeScene(), view);
    // fan rays are the only strokes drawn at reduced alpha
    const rays = ops.filter((o) => o.op === "stroke" && o.alpha < 1);
    expect(rays).toHaveLength(60);
  });

  it("marks lidar returns but not misses", () => {
    const lidar = Array(60).fill(1.0);
    lidar[5] = 0.5;
    lidar[30] = 0.2;
    const { ctx, ops } = recordingCtx();
    drawScene(ctx, makeFrame({ lidar }), makeScene(), view);
    const dots = ops.filter(
      (o) =>
        o.op === "arc" && o.alpha > 0.5 && o.alpha < 1 &&
        o.fillStyle === "#3fb950",
    );
    expect(dots).toHaveLength(2);
  });

  it("toggles the ego takeover tint within a single frame", () => {
    const a = recordingCtx();
    drawScene(a.ctx, makeFrame({ gate: { mode: "live", I: false } }), makeScene(), view);
    const b = recordingCtx();
    drawScene(b.ctx, makeFrame({ gate: { mode: "live", I: true } }), makeScene(), view);
    const lastFill = (ops: Op[]) =>
      ops.filter((o) => o.op === "fill").map((o) => o.fillStyle);
    expect(lastFill(a.ops)).toContain("#e6edf3");
    expect(lastFill(a.ops)).not.toContain("#f85149");
    expect(lastFill(b.ops)).toContain("#f85149");
  });

  it("styles the two boundary kinds differently", () => {
    const { ctx, ops } = recordingCtx();
    drawScene(ctx, makeFrame(), makeScene(), view);
    const dashes = ops
      .filter((o) => o.op === "setLineDash")
      .map((o) => (o.args[0] as number[]).length);
    expect(dashes).toContain(2); // broken white uses a dash pattern
    expect(dashes).toContain(0); // solid yellow resets to none
  });
});
