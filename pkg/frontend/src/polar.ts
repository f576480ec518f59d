// Polar rendering helpers. Everything here is pure string/number work so the
// mapping from gain vector to drawn curve can be tested without a DOM: the
// SVG path for a vector is a deterministic function of its exact values,
// which is what makes the round-trip check meaningful.

export type RadialScale = "linear" | "db";

export interface PolarLayout {
  cx: number;
  cy: number;
  radius: number; // radius of gain 1 / 0 dB
  scale: RadialScale;
  floorDb: number; // dB value mapped to the center when scale is "db"
}

export const DEFAULT_LAYOUT: PolarLayout = {
  cx: 200,
  cy: 200,
  radius: 180,
  scale: "linear",
  floorDb: -40,
};

// Fraction of the full radius for a gain under the chosen scale. Linear maps
// [0, 1] directly; dB maps [floorDb, 0] dB onto [0, 1] with everything below
// the floor collapsed to the center.
export function radialFraction(gain: number, scale: RadialScale, floorDb: number): number {
  if (scale === "linear") return Math.min(1, Math.max(0, gain));
  if (gain <= 0) return 0;
  const db = 20 * Math.log10(gain);
  return Math.min(1, Math.max(0, (db - floorDb) / (0 - floorDb)));
}

// Screen position of a gain sample. Angle 0 points right (east) and angles
// grow counter-clockwise, matching the mathematical convention of the gain
// functions; SVG's y axis points down, hence the minus.
export function polarPoint(
  gain: number,
  index: number,
  l: number,
  layout: PolarLayout,
): { x: number; y: number } {
  const theta = (2 * Math.PI * index) / l;
  const r = layout.radius * radialFraction(gain, layout.scale, layout.floorDb);
  return {
    x: layout.cx + r * Math.cos(theta),
    y: layout.cy - r * Math.sin(theta),
  };
}

// Closed SVG path through all L samples. Coordinates are emitted with the
// shortest exact decimal representation of each double (String(number)), so
// two vectors produce the same path if and only if they round-trip to the
// same doubles.
export function polarPath(gains: number[], layout: PolarLayout = DEFAULT_LAYOUT): string {
  if (gains.length < 3) throw new Error("polar path needs at least 3 gains");
  const parts: string[] = [];
  for (let i = 0; i < gains.length; i++) {
    const { x, y } = polarPoint(gains[i], i, gains.length, layout);
    parts.push(`${i === 0 ? "M" : "L"}${x},${y}`);
  }
  parts.push("Z");
  return parts.join(" ");
}

// Handle dot positions for the editor overlay.
export function handlePoints(
  gains: number[],
  layout: PolarLayout = DEFAULT_LAYOUT,
): { x: number; y: number; index: number }[] {
  return gains.map((g, i) => ({ ...polarPoint(g, i, gains.length, layout), index: i }));
}

// Radii for background grid circles, as (fraction, label) pairs.
export function gridRings(scale: RadialScale, floorDb: number): { fraction: number; label: string }[] {
  if (scale === "linear") {
    return [0.25, 0.5, 0.75, 1].map((f) => ({ fraction: f, label: f.toFixed(2) }));
  }
  const rings: { fraction: number; label: string }[] = [];
  for (let db = floorDb + 10; db <= 0; db += 10) {
    rings.push({ fraction: (db - floorDb) / (0 - floorDb), label: `${db} dB` });
  }
  return rings;
}

// Angle (degrees, math convention) of a screen point relative to the center;
// used to find which handle a pointer gesture grabs.
export function pointerAngleDeg(x: number, y: number, layout: PolarLayout): number {
  const deg = (Math.atan2(layout.cy - y, x - layout.cx) * 180) / Math.PI;
  return (deg + 360) % 360;
}

// Gain implied by a pointer position under the layout's scale (inverse of
// radialFraction), clamped to [0, 1].
export function pointerGain(x: number, y: number, layout: PolarLayout): number {
  const dx = x - layout.cx;
  const dy = layout.cy - y;
  const frac = Math.min(1, Math.sqrt(dx * dx + dy * dy) / layout.radius);
  if (layout.scale === "linear") return frac;
  if (frac <= 0) return 0;
  const db = layout.floorDb + frac * (0 - layout.floorDb);
  return Math.pow(10, db / 20);
}
