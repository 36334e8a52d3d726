import type { Skeleton } from "./types.js";

// Stick-figure kinematics for the 135-dim frames: 3 root translation
// values then 22 joint rotations as 6D (first two rotation-matrix columns,
// column after column). Bone offsets are display-only guesses keyed by
// joint name; the hierarchy itself comes from the server's skeleton.

export type Vec3 = [number, number, number];
export type Mat3 = [Vec3, Vec3, Vec3]; // rows

export const FRAME_DIM = 135;
export const NUM_JOINTS = 22;

export function decodeFrame(vec: number[]): { root: Vec3; rotations: number[][] } {
  if (vec.length !== FRAME_DIM) throw new Error(`frame must have ${FRAME_DIM} values`);
  const rotations: number[][] = [];
  for (let j = 0; j < NUM_JOINTS; j++) rotations.push(vec.slice(3 + j * 6, 3 + j * 6 + 6));
  return { root: [vec[0], vec[1], vec[2]], rotations };
}

export function sixdToMatrix(r: number[]): Mat3 {
  const a1: Vec3 = [r[0], r[1], r[2]];
  const a2: Vec3 = [r[3], r[4], r[5]];
  const b1 = normalize(a1);
  const d = dot(b1, a2);
  const b2 = normalize([a2[0] - d * b1[0], a2[1] - d * b1[1], a2[2] - d * b1[2]]);
  const b3 = cross(b1, b2);
  // columns b1, b2, b3
  return [
    [b1[0], b2[0], b3[0]],
    [b1[1], b2[1], b3[1]],
    [b1[2], b2[2], b3[2]],
  ];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out: number[][] = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (let i = 0; i < 3; i++)
    for (let j = 0; j < 3; j++)
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return out as Mat3;
}

export function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
  ];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  if (n === 0) return [1, 0, 0];
  return [v[0] / n, v[1] / n, v[2] / n];
}

// Rest-pose offsets (child relative to parent, y up, x to the body's
// left). Purely cosmetic: any name the table misses hangs upward so an
// unexpected skeleton still renders something.
const OFFSETS: Record<string, Vec3> = {
  left_hip: [0.09, -0.06, 0],
  right_hip: [-0.09, -0.06, 0],
  spine1: [0, 0.11, 0],
  spine2: [0, 0.12, 0],
  spine3: [0, 0.12, 0],
  left_knee: [0, -0.38, 0],
  right_knee: [0, -0.38, 0],
  left_ankle: [0, -0.4, 0],
  right_ankle: [0, -0.4, 0],
  left_foot: [0, -0.06, 0.12],
  right_foot: [0, -0.06, 0.12],
  neck: [0, 0.09, 0],
  head: [0, 0.13, 0],
  left_collar: [0.07, 0.05, 0],
  right_collar: [-0.07, 0.05, 0],
  left_shoulder: [0.1, 0, 0],
  right_shoulder: [-0.1, 0, 0],
  left_elbow: [0.26, 0, 0],
  right_elbow: [-0.26, 0, 0],
  left_wrist: [0.25, 0, 0],
  right_wrist: [-0.25, 0, 0],
};

export function buildOffsets(skeleton: Skeleton): Vec3[] {
  return skeleton.joints.map((name) => OFFSETS[name] ?? [0, 0.1, 0]);
}

// Accumulate rotations down the tree: joint i rotates its own frame, its
// children inherit the accumulated transform of the parent.
export function forwardKinematics(vec: number[], skeleton: Skeleton, offsets?: Vec3[]): Vec3[] {
  const { root, rotations } = decodeFrame(vec);
  const bone = offsets ?? buildOffsets(skeleton);
  const world: Mat3[] = new Array(NUM_JOINTS);
  const pos: Vec3[] = new Array(NUM_JOINTS);
  for (let j = 0; j < NUM_JOINTS; j++) {
    const local = sixdToMatrix(rotations[j]);
    const parent = skeleton.parents[j];
    if (parent < 0) {
      world[j] = local;
      pos[j] = [...root];
    } else {
      world[j] = matMul(world[parent], local);
      const reach = matVec(world[parent], bone[j]);
      pos[j] = [pos[parent][0] + reach[0], pos[parent][1] + reach[1], pos[parent][2] + reach[2]];
    }
  }
  return pos;
}

// Orthographic front view into pixel space, centered, y flipped.
export function project(
  positions: Vec3[],
  width: number,
  height: number,
  scale = 0.38,
): { x: number; y: number }[] {
  const s = Math.min(width, height) * scale;
  return positions.map((p) => ({
    x: width / 2 + p[0] * s,
    y: height * 0.52 - p[1] * s,
  }));
}
