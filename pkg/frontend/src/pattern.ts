// Editor-side pattern state: either a composition of analytic primitives or a
// freehand vector of per-angle gain handles. The derived gain vector is what
// gets sent on the wire; it always has length `l` and every entry sits inside
// [floorGain, 1].

export const DEFAULT_L = 72;
export const DEFAULT_FLOOR_DB = -20;

// Dense grid used to max-normalize primitive compositions. Matches the
// service's own normalization grid so local previews line up with resolved
// vectors on grid-aligned lobes.
const NORM_GRID_POINTS = 720;

export type DmaPrimitive = {
  kind: "dma-simplified";
  mu: number; // 0 = figure eight, 1 = omni
  thetaSDeg: number; // steering direction, degrees
  orderJ: number; // lobe sharpening exponent, integer >= 1
};

export type RectPrimitive = {
  kind: "rect";
  thetaStartDeg: number; // arc start, inclusive, counter-clockwise
  thetaEndDeg: number; // arc end, inclusive
};

export type Primitive = DmaPrimitive | RectPrimitive;

export type EditorMode = "primitive-composition" | "freehand";

export interface EditorPattern {
  mode: EditorMode;
  primitives: Primitive[];
  handles: number[]; // length l, each in [floorGain, 1]
  l: number;
  floorDb: number;
}

export function floorGain(floorDb: number): number {
  return Math.pow(10, floorDb / 20);
}

export function clampGain(value: number, floorDb: number): number {
  const lo = floorGain(floorDb);
  if (!Number.isFinite(value)) return lo;
  return Math.min(1, Math.max(lo, value));
}

export function handleAngleDeg(index: number, l: number): number {
  return (index * 360) / l;
}

// Nearest handle index for an angle in degrees; wraps so 359.9 maps to 0.
export function handleIndexForAngle(angleDeg: number, l: number): number {
  const wrapped = ((angleDeg % 360) + 360) % 360;
  return Math.round(wrapped / (360 / l)) % l;
}

function wrapRad(theta: number): number {
  const twoPi = 2 * Math.PI;
  return ((theta % twoPi) + twoPi) % twoPi;
}

export function evalPrimitive(p: Primitive, thetaRad: number): number {
  if (p.kind === "dma-simplified") {
    const thetaS = (p.thetaSDeg * Math.PI) / 180;
    const base = p.mu + (1 - p.mu) * Math.cos(thetaRad - thetaS);
    return Math.pow(Math.abs(base), p.orderJ);
  }
  const start = (p.thetaStartDeg * Math.PI) / 180;
  const end = (p.thetaEndDeg * Math.PI) / 180;
  const width = wrapRad(end - start);
  const offset = wrapRad(thetaRad - start);
  return offset <= width ? 1 : 0;
}

function rawSum(primitives: Primitive[], thetaRad: number): number {
  let total = 0;
  for (const p of primitives) total += evalPrimitive(p, thetaRad);
  return total;
}

// Additive combination of primitives, max-normalized over a dense angular
// grid, clipped to [0, 1], then lifted onto the gain floor. This mirrors the
// service's /patterns/resolve behavior for preview purposes; the wire vector
// for primitive mode still comes from the service so both sides agree on the
// normalizer bit for bit.
export function combineGains(primitives: Primitive[], l: number, floorDb: number): number[] {
  if (primitives.length === 0) throw new Error("pattern needs at least one primitive");
  let normalizer = 0;
  for (let i = 0; i < NORM_GRID_POINTS; i++) {
    const theta = (2 * Math.PI * i) / NORM_GRID_POINTS;
    normalizer = Math.max(normalizer, rawSum(primitives, theta));
  }
  if (normalizer <= 0) throw new Error("primitive sum is zero at every angle");
  const lo = floorGain(floorDb);
  const gains: number[] = new Array(l);
  for (let i = 0; i < l; i++) {
    const theta = (2 * Math.PI * i) / l;
    const g = Math.min(1, Math.max(0, rawSum(primitives, theta) / normalizer));
    gains[i] = Math.max(g, lo);
  }
  return gains;
}

export function newPrimitivePattern(
  primitives: Primitive[],
  l: number = DEFAULT_L,
  floorDb: number = DEFAULT_FLOOR_DB,
): EditorPattern {
  return {
    mode: "primitive-composition",
    primitives,
    handles: combineGains(primitives, l, floorDb),
    l,
    floorDb,
  };
}

export function newFreehandPattern(
  gains: number[],
  floorDb: number = DEFAULT_FLOOR_DB,
): EditorPattern {
  return {
    mode: "freehand",
    primitives: [],
    handles: gains.map((g) => clampGain(g, floorDb)),
    l: gains.length,
    floorDb,
  };
}

// The vector that conditions the filter. Kept as a copy so callers cannot
// mutate editor state through it.
export function activeVector(pattern: EditorPattern): number[] {
  return pattern.handles.slice();
}

// Handle drag: sets the gain at the grabbed angle, clamped into [floor, 1].
// Dragging while in primitive mode converts the pattern to freehand, seeded
// from the currently derived vector, so the gesture edits what is visible.
export function dragHandle(
  pattern: EditorPattern,
  angleDeg: number,
  value: number,
): EditorPattern {
  const idx = handleIndexForAngle(angleDeg, pattern.l);
  const handles = pattern.handles.slice();
  handles[idx] = clampGain(value, pattern.floorDb);
  return {
    mode: "freehand",
    primitives: [],
    handles,
    l: pattern.l,
    floorDb: pattern.floorDb,
  };
}

// Primitive parameter change: replaces one primitive and re-derives handles.
export function updatePrimitive(
  pattern: EditorPattern,
  index: number,
  next: Primitive,
): EditorPattern {
  if (pattern.mode !== "primitive-composition") {
    throw new Error("primitive edits require primitive-composition mode");
  }
  if (index < 0 || index >= pattern.primitives.length) {
    throw new Error(`no primitive at index ${index}`);
  }
  const primitives = pattern.primitives.slice();
  primitives[index] = next;
  return newPrimitivePattern(primitives, pattern.l, pattern.floorDb);
}

// Wire form of a primitive for POST /patterns/resolve.
export function primitiveToWire(p: Primitive): Record<string, number | string> {
  if (p.kind === "dma-simplified") {
    return { kind: "dma-simplified", mu: p.mu, theta_s_deg: p.thetaSDeg, order_j: p.orderJ };
  }
  return { kind: "rect", theta_start_deg: p.thetaStartDeg, theta_end_deg: p.thetaEndDeg };
}
