import { describe, expect, it } from "vitest";
import {
  clamp,
  controlMessage,
  parseFrame,
  pingMessage,
} from "../src/protocol";

function stateJson(extra: Record<string, unknown> = {}): string {
  return JSON.stringify({
    type: "state",
    tick: 42,
    ego: { x: 1.5, y: -2.0, heading: 0.3, speed: 4.2 },
    traffic: [{ x: 10, y: 0, heading: 3.1 }],
    obstacles: [{ x: 5, y: 5, radius: 1 }],
    lidar: Array(60).fill(1.0),
    gate: { mode: "live", I: false },
    losses: { loss_td: 0.5 },
    eval: {},
    ...extra,
  });
}

describe("parseFrame", () => {
  it("accepts a well-formed state frame", () => {
    const f = parseFrame(stateJson());
    expect(f).not.toBeNull();
    if (f === null || f.type !== "state") throw new Error("expected state");
    expect(f.tick).toBe(42);
    expect(f.ego.speed).toBeCloseTo(4.2);
    expect(f.lidar).toHaveLength(60);
    expect(f.gate.I).toBe(false);
  });

  it("fills safe defaults for optional collections", () => {
    const f = parseFrame(
      stateJson({ traffic: undefined, obstacles: undefined, losses: undefined, eval: undefined }),
    );
    if (f === null || f.type !== "state") throw new Error("expected state");
    expect(f.traffic).toEqual([]);
    expect(f.obstacles).toEqual([]);
    expect(f.losses).toEqual({});
    expect(f.eval).toEqual({});
  });

  it("coerces the intervention flag to a boolean", () => {
    const f = parseFrame(stateJson({ gate: { mode: "live", I: 1 } }));
    if (f === null || f.type !== "state") throw new Error("expected state");
    expect(f.gate.I).toBe(true);
  });

  it("rejects garbage, unknown types, and mangled frames", () => {
    expect(parseFrame("{not json")).toBeNull();
    expect(parseFrame('"just a string"')).toBeNull();
    expect(parseFrame(JSON.stringify({ type: "mystery" }))).toBeNull();
    expect(parseFrame(stateJson({ ego: { x: "oops" } }))).toBeNull();
    expect(parseFrame(stateJson({ tick: "ten" }))).toBeNull();
    expect(parseFrame(stateJson({ lidar: "none" }))).toBeNull();
  });

  it("parses pong frames for the round-trip readout", () => {
    const f = parseFrame(JSON.stringify({ type: "pong", t: 123.25 }));
    expect(f).toEqual({ type: "pong", t: 123.25 });
    expect(parseFrame(JSON.stringify({ type: "pong" }))).toBeNull();
  });
});

describe("control frames", () => {
  it("clamps steer and accel into [-1, 1]", () => {
    const msg = JSON.parse(controlMessage(true, 3.0, -7.5, 1000.4));
    expect(msg).toEqual({
      type: "control",
      takeover: true,
      steer: 1,
      accel: -1,
      client_time_ms: 1000,
    });
  });

  it("passes in-range values through untouched", () => {
    const msg = JSON.parse(controlMessage(false, -0.25, 0.5, 7));
    expect(msg.steer).toBe(-0.25);
    expect(msg.accel).toBe(0.5);
    expect(msg.takeover).toBe(false);
  });
});

describe("clamp", () => {
  it("bounds values and maps non-finite input to zero", () => {
    expect(clamp(0.4)).toBe(0.4);
    expect(clamp(-9)).toBe(-1);
    expect(clamp(9)).toBe(1);
    expect(clamp(NaN)).toBe(0);
    expect(clamp(Infinity)).toBe(0);
  });
});

describe("ping", () => {
  it("embeds the client timestamp for echo", () => {
    expect(JSON.parse(pingMessage(55))).toEqual({ type: "ping", t: 55 });
  });
});
