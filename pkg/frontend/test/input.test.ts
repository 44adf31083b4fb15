import { describe, expect, it } from "vitest";
import { InputTracker, readGamepads } from "../src/input";
import type { PadSnapshot } from "../src/input";

function pad(axes: number[] = [0, 0], held: number[] = []): PadSnapshot {
  const buttons = Array(8).fill(false);
  for (const i of held) buttons[i] = true;
  return { axes, buttons };
}

describe("keyboard takeover", () => {
  it("sends nothing while idle", () => {
    const t = new InputTracker();
    expect(t.sample()).toBeNull();
    t.keyDown("ArrowUp"); // arrows without the dead-man switch stay local
    expect(t.sample()).toBeNull();
  });

  it("up arrow with the switch held commands full throttle", () => {
    const t = new InputTracker();
    t.keyDown("Space");
    t.keyDown("ArrowUp");
    expect(t.sample()).toEqual({ takeover: true, steer: 0, accel: 1 });
  });

  it("takeover with no arrows is a neutral hold", () => {
    const t = new InputTracker();
    t.keyDown("Space");
    expect(t.sample()).toEqual({ takeover: true, steer: 0, accel: 0 });
  });

  it("right arrow steers positive, left negative, both cancel", () => {
    const t = new InputTracker();
    t.keyDown("Space");
    t.keyDown("ArrowRight");
    expect(t.sample()!.steer).toBe(1);
    t.keyDown("ArrowLeft");
    expect(t.sample()!.steer).toBe(0);
    t.keyUp("ArrowRight");
    expect(t.sample()!.steer).toBe(-1);
  });

  it("releasing the switch emits exactly one takeover=false", () => {
    const t = new InputTracker();
    t.keyDown("Space");
    t.keyDown("ArrowDown");
    expect(t.sample()!.accel).toBe(-1);
    t.keyUp("Space");
    expect(t.sample()).toEqual({ takeover: false, steer: 0, accel: 0 });
    expect(t.sample()).toBeNull(); // no repeats after the release edge
  });

  it("window blur drops the dead-man switch", () => {
    const t = new InputTracker();
    t.keyDown("Space");
    t.sample();
    t.blur();
    expect(t.sample()).toEqual({ takeover: false, steer: 0, accel: 0 });
    expect(t.takeoverHeld).toBe(false);
  });

  it("flags driving keys as handled and others as not", () => {
    const t = new InputTracker();
    expect(t.keyDown("Space")).toBe(true);
    expect(t.keyDown("ArrowLeft")).toBe(true);
    expect(t.keyDown("KeyQ")).toBe(false);
  });
});

describe("gamepad takeover", () => {
  it("axis 0.5 passes through as steer 0.5", () => {
    const t = new InputTracker();
    t.setGamepad(pad([0.5, 0], [0]));
    expect(t.sample()).toEqual({ takeover: true, steer: 0.5, accel: 0 });
  });

  it("stick forward accelerates (native axis is inverted)", () => {
    const t = new InputTracker();
    t.setGamepad(pad([0, -0.8], [5]));
    expect(t.sample()!.accel).toBeCloseTo(0.8);
  });

  it("applies a deadzone to axis noise", () => {
    const t = new InputTracker();
    t.setGamepad(pad([0.05, -0.03], [0]));
    expect(t.sample()).toEqual({ takeover: true, steer: 0, accel: 0 });
  });

  it("without a held dead-man button the pad is inert", () => {
    const t = new InputTracker();
    t.setGamepad(pad([0.9, -0.9], []));
    expect(t.sample()).toBeNull();
  });

  it("pad release produces the single takeover=false edge", () => {
    const t = new InputTracker();
    t.setGamepad(pad([0.3, 0], [0]));
    t.sample();
    t.setGamepad(pad([0.3, 0], []));
    expect(t.sample()).toEqual({ takeover: false, steer: 0, accel: 0 });
    expect(t.sample()).toBeNull();
  });

  it("clamps axes that report out of range", () => {
    const t = new InputTracker();
    t.setGamepad(pad([1.4, 2.0], [5]));
    const s = t.sample()!;
    expect(s.steer).toBe(1);
    expect(s.accel).toBe(-1);
  });
});

describe("readGamepads", () => {
  it("snapshots the first connected pad and ignores nulls", () => {
    const gp = {
      connected: true,
      axes: [0.25, -0.5],
      buttons: [{ pressed: true }, { pressed: false }],
    } as unknown as Gamepad;
    const snap = readGamepads([null, gp]);
    expect(snap).toEqual({ axes: [0.25, -0.5], buttons: [true, false] });
    expect(readGamepads([null, null])).toBeNull();
  });
});
