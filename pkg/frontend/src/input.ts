import { clamp } from "./protocol";

// Keymap: hold Space as the dead-man takeover switch, arrows steer and
// accelerate. Releasing the switch ends the intervention immediately and
// emits exactly one takeover=false frame. A gamepad (if present) takes
// over the same role: hold A or the right bumper, left stick steers,
// pushing the stick forward accelerates.

export interface ControlSample {
  takeover: boolean;
  steer: number;
  accel: number;
}

export interface PadSnapshot {
  axes: number[];
  buttons: boolean[];
}

const DEADMAN_KEY = "Space";
const STEER_KEYS: Record<string, number> = { ArrowLeft: -1, ArrowRight: 1 };
const ACCEL_KEYS: Record<string, number> = { ArrowUp: 1, ArrowDown: -1 };
const PAD_DEADMAN_BUTTONS = [0, 5]; // A / RB
const PAD_DEADZONE = 0.1;

export class InputTracker {
  private keys = new Set<string>();
  private pad: PadSnapshot | null = null;
  private prevHeld = false;
  private releasePending = false;

  // Returns true when the key belongs to the driving map (callers
  // preventDefault so the page does not scroll).
  keyDown(code: string): boolean {
    const ours = code === DEADMAN_KEY || code in STEER_KEYS || code in ACCEL_KEYS;
    if (ours) this.keys.add(code);
    return ours;
  }

  keyUp(code: string): boolean {
    return this.keys.delete(code);
  }

  // Focus loss must never leave a stale takeover engaged.
  blur(): void {
    this.keys.clear();
    this.pad = null;
  }

  setGamepad(pad: PadSnapshot | null): void {
    this.pad = pad;
  }

  private padDeadmanHeld(): boolean {
    if (!this.pad) return false;
    return PAD_DEADMAN_BUTTONS.some((i) => this.pad!.buttons[i]);
  }

  get takeoverHeld(): boolean {
    return this.keys.has(DEADMAN_KEY) || this.padDeadmanHeld();
  }

  private axis(raw: number | undefined): number {
    const v = raw ?? 0;
    return Math.abs(v) < PAD_DEADZONE ? 0 : clamp(v);
  }

  // One poll of the combined device state. Returns the control to send
  // this tick, or null when idle (no takeover held, no release edge due).
  sample(): ControlSample | null {
    const held = this.takeoverHeld;
    if (!held && this.prevHeld) this.releasePending = true;
    this.prevHeld = held;

    if (held) {
      let steer = 0;
      let accel = 0;
      if (this.padDeadmanHeld() && this.pad) {
        steer = this.axis(this.pad.axes[0]);
        accel = this.axis(-(this.pad.axes[1] ?? 0)); // stick forward is -1
      } else {
        for (const [code, v] of Object.entries(STEER_KEYS)) {
          if (this.keys.has(code)) steer += v;
        }
        for (const [code, v] of Object.entries(ACCEL_KEYS)) {
          if (this.keys.has(code)) accel += v;
        }
      }
      return { takeover: true, steer: clamp(steer), accel: clamp(accel) };
    }
    if (this.releasePending) {
      this.releasePending = false;
      return { takeover: false, steer: 0, accel: 0 };
    }
    return null;
  }
}

// Snapshot the first connected browser gamepad into plain data (testable,
// and Chrome's live Gamepad objects mutate underneath you anyway).
export function readGamepads(pads: (Gamepad | null)[]): PadSnapshot | null {
  const gp = pads.find((p): p is Gamepad => p !== null && p.connected);
  if (!gp) return null;
  return {
    axes: gp.axes.slice(),
    buttons: gp.buttons.map((b) => b.pressed),
  };
}
