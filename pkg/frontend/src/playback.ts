import type { WindowDoc } from "./types.js";

// Motion playback buffer. Windows land whole (8 frames at the planner
// rate); the buffer concatenates them, remembers where one primitive hands
// off to another, and refuses to blend across those boundaries: a seam is
// either shown as a hard cut with its marker, or not crossed at all.

export interface Seam {
  atFrame: number; // first frame index after the boundary
  from: string | null;
  to: string;
  forced: boolean; // the incoming window came from an operator override
  switch: boolean; // primitive changed across the boundary
  gap: boolean; // window indices were not contiguous (missed frames)
}

export interface SampledFrame {
  frame: number[];
  angles: number[];
  primitive: string;
  forced: boolean;
  blended: boolean;
  seam: Seam | null; // boundary this sample sits against, if any
}

interface FrameMeta {
  primitive: string;
  forced: boolean;
}

export class PlaybackBuffer {
  readonly seams: Seam[] = [];
  private readonly frames: number[][] = [];
  private readonly angles: number[][] = [];
  private readonly meta: FrameMeta[] = [];
  private lastIndex: number | null = null;
  private lastPrimitive: string | null = null;
  private pendingGap = false;

  constructor(readonly fps: number) {
    if (!(fps > 0)) throw new Error("fps must be positive");
  }

  get frameCount(): number {
    return this.frames.length;
  }

  get duration(): number {
    return this.frames.length / this.fps;
  }

  // A reconnect may have skipped windows even when indices happen to look
  // contiguous from here; force a gap seam on the next append.
  markGap(): void {
    this.pendingGap = true;
  }

  // Returns false for duplicates (same or older window replayed after a
  // reconnect); those are dropped without touching the timeline.
  append(w: WindowDoc): boolean {
    if (this.lastIndex !== null && w.index <= this.lastIndex) return false;
    const gap = this.pendingGap || (this.lastIndex !== null && w.index !== this.lastIndex + 1);
    const switched = this.lastPrimitive !== null && w.primitive !== this.lastPrimitive;
    if (gap || switched) {
      this.seams.push({
        atFrame: this.frames.length,
        from: this.lastPrimitive,
        to: w.primitive,
        forced: w.forced,
        switch: switched,
        gap,
      });
    }
    for (let k = 0; k < w.frames.length; k++) {
      this.frames.push(w.frames[k]);
      this.angles.push(w.angles[k]);
      this.meta.push({ primitive: w.primitive, forced: w.forced });
    }
    this.pendingGap = false;
    this.lastIndex = w.index;
    this.lastPrimitive = w.primitive;
    return true;
  }

  seamBetween(i: number): Seam | null {
    for (const s of this.seams) if (s.atFrame === i + 1) return s;
    return null;
  }

  frameAt(i: number): SampledFrame | null {
    if (i < 0 || i >= this.frames.length) return null;
    return {
      frame: this.frames[i],
      angles: this.angles[i],
      primitive: this.meta[i].primitive,
      forced: this.meta[i].forced,
      blended: false,
      seam: this.seamBetween(i),
    };
  }

  // Sample at time t (seconds). Between ordinary frames the sample is
  // linearly blended; when the next frame sits on the far side of a seam
  // the exact frame is returned with the seam attached instead.
  sample(t: number, interpolate = true): SampledFrame | null {
    const n = this.frames.length;
    if (n === 0) return null;
    const pos = Math.max(0, t * this.fps);
    let i = Math.floor(pos);
    if (i >= n - 1) return this.frameAt(n - 1);
    const alpha = pos - i;
    const seam = this.seamBetween(i);
    if (!interpolate || alpha === 0 || seam !== null) {
      return {
        frame: this.frames[i],
        angles: this.angles[i],
        primitive: this.meta[i].primitive,
        forced: this.meta[i].forced,
        blended: false,
        seam,
      };
    }
    return {
      frame: lerp(this.frames[i], this.frames[i + 1], alpha),
      angles: lerp(this.angles[i], this.angles[i + 1], alpha),
      primitive: this.meta[i].primitive,
      forced: this.meta[i].forced,
      blended: true,
      seam: null,
    };
  }
}

function lerp(a: number[], b: number[], alpha: number): number[] {
  const out = new Array<number>(a.length);
  for (let k = 0; k < a.length; k++) out[k] = a[k] + (b[k] - a[k]) * alpha;
  return out;
}
