import type { AffectGeometry } from "./types.js";

// Valence-arousal plot geometry. The plot is the [-1,1] x [0,1] box; the
// five regions come from the affect config the server hands out in
// /bootstrap, so the background shading always matches the classifier the
// server actually ran. Displayed labels use the server-reported quadrant;
// classify() exists for shading and for sanity checks only.

export interface Region {
  label: string;
  v0: number;
  v1: number;
  a0: number;
  a1: number;
}

export function regions(geom: AffectGeometry): Region[] {
  const band = geom.neutral_valence_band;
  const split = geom.arousal_split;
  return [
    { label: "Q1", v0: -1, v1: -band, a0: split, a1: 1 },
    { label: "Q4", v0: -1, v1: -band, a0: 0, a1: split },
    { label: "Q2", v0: band, v1: 1, a0: split, a1: 1 },
    { label: "Q3", v0: band, v1: 1, a0: 0, a1: split },
    { label: "Neutral", v0: -band, v1: band, a0: 0, a1: 1 },
  ];
}

export function classify(v: number, a: number, geom: AffectGeometry): string {
  if (Math.abs(v) <= geom.neutral_valence_band) return "Neutral";
  if (v < 0) return a >= geom.arousal_split ? "Q1" : "Q4";
  return a >= geom.arousal_split ? "Q2" : "Q3";
}

export function inRegion(v: number, a: number, label: string, geom: AffectGeometry): boolean {
  return classify(v, a, geom) === label;
}

// (v,a) -> pixel coordinates; arousal 1 sits at the top edge.
export function plotPoint(
  v: number,
  a: number,
  width: number,
  height: number,
): { x: number; y: number } {
  return { x: ((v + 1) / 2) * width, y: (1 - a) * height };
}

export interface PixelRect {
  label: string;
  x: number;
  y: number;
  w: number;
  h: number;
}

export function regionPixelRects(
  geom: AffectGeometry,
  width: number,
  height: number,
): PixelRect[] {
  return regions(geom).map((r) => {
    const tl = plotPoint(r.v0, r.a1, width, height);
    const br = plotPoint(r.v1, r.a0, width, height);
    return { label: r.label, x: tl.x, y: tl.y, w: br.x - tl.x, h: br.y - tl.y };
  });
}
