import type { StateFrame } from "./protocol";

// Latest-frame mailbox decoupling the socket from the render loop: the
// renderer always paints fresh state, never a backlog, and can tell how
// stale its picture is.
export class FrameMailbox {
  private frame: StateFrame | null = null;
  private fresh = false;
  private receivedAt = -Infinity;

  put(frame: StateFrame, now: number): void {
    this.frame = frame;
    this.fresh = true;
    this.receivedAt = now;
  }

  latest(): StateFrame | null {
    return this.frame;
  }

  // Returns the frame only once per put; polling again before the next
  // arrival yields null so per-frame consumers (charts) see no duplicates.
  takeFresh(): StateFrame | null {
    if (!this.fresh) return null;
    this.fresh = false;
    return this.frame;
  }

  ageMs(now: number): number {
    return this.frame === null ? Infinity : now - this.receivedAt;
  }

  clear(): void {
    this.frame = null;
    this.fresh = false;
    this.receivedAt = -Infinity;
  }
}
