/** Canvas <-> metre mapping and small convex-geometry helpers. */

import type { Vec2 } from "./types.js";

/**
 * Invertible affine map between scene metres (y up) and canvas pixels
 * (y down). Construction fits the extent into the canvas with a margin,
 * preserving aspect ratio.
 */
export class CanvasMapping {
  readonly scale: number; // pixels per metre
  readonly offsetX: number;
  readonly offsetY: number;

  constructor(
    readonly extent: [number, number, number, number],
    readonly width: number,
    readonly height: number,
    margin = 16,
  ) {
    const [xmin, xmax, ymin, ymax] = extent;
    const spanX = xmax - xmin;
    const spanY = ymax - ymin;
    if (spanX <= 0 || spanY <= 0) throw new Error("degenerate extent");
    this.scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
    // centre the extent in the canvas
    this.offsetX = (width - this.scale * spanX) / 2 - this.scale * xmin;
    this.offsetY = (height + this.scale * spanY) / 2 + this.scale * ymin;
  }

  toPixel([x, y]: Vec2): Vec2 {
    return [this.offsetX + this.scale * x, this.offsetY - this.scale * y];
  }

  toMetre([px, py]: Vec2): Vec2 {
    return [(px - this.offsetX) / this.scale, (this.offsetY - py) / this.scale];
  }

  /** Pixels per metre times a metre radius, for hit-testing and sprites. */
  pixelRadius(metres: number): number {
    return this.scale * metres;
  }
}

/** Andrew's monotone-chain convex hull; returns vertices in CCW order. */
export function convexHull(points: Vec2[]): Vec2[] {
  const pts = [...points].sort((a, b) => (a[0] - b[0]) || (a[1] - b[1]));
  if (pts.length <= 2) return pts;
  const cross = (o: Vec2, a: Vec2, b: Vec2) =>
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  const lower: Vec2[] = [];
  for (const p of pts) {
    while (lower.length >= 2 && cross(lower[lower.length - 2]!, lower[lower.length - 1]!, p) <= 0) {
      lower.pop();
    }
    lower.push(p);
  }
  const upper: Vec2[] = [];
  for (const p of [...pts].reverse()) {
    while (upper.length >= 2 && cross(upper[upper.length - 2]!, upper[upper.length - 1]!, p) <= 0) {
      upper.pop();
    }
    upper.push(p);
  }
  lower.pop();
  upper.pop();
  return lower.concat(upper);
}

/** Point-in-convex-polygon test, boundary counts as inside. */
export function pointInHull(point: Vec2, hull: Vec2[], eps = 1e-12): boolean {
  if (hull.length === 0) return false;
  if (hull.length === 1) {
    return Math.hypot(point[0] - hull[0]![0], point[1] - hull[0]![1]) <= eps;
  }
  if (hull.length === 2) {
    const [a, b] = [hull[0]!, hull[1]!];
    const cross = (b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0]);
    if (Math.abs(cross) > eps) return false;
    const dot = (point[0] - a[0]) * (b[0] - a[0]) + (point[1] - a[1]) * (b[1] - a[1]);
    return dot >= -eps && dot <= (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2 + eps;
  }
  for (let i = 0; i < hull.length; i++) {
    const a = hull[i]!;
    const b = hull[(i + 1) % hull.length]!;
    const cross = (b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0]);
    if (cross < -eps) return false; // CCW hull: inside points sit left of every edge
  }
  return true;
}

export function distance(a: Vec2, b: Vec2): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1]);
}
