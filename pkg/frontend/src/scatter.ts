/** Latent-space scatter: training users coloured by label, plus "you". */

import { CanvasMapping, convexHull, pointInHull } from "./geometry.js";
import type { LatentUser, Vec2 } from "./types.js";

const LABEL_COLOURS: Record<string, string> = {
  left: "#c0392b",
  right: "#2471a3",
  colour: "#8e44ad",
  shape: "#1e8449",
};

export type LabelKind = "handedness" | "grouping";

export function clusterPoints(users: LatentUser[], kind: LabelKind, value: string): Vec2[] {
  return users
    .filter((u) => u[kind] === value && u.mu.length >= 2)
    .map((u) => [u.mu[0]!, u.mu[1]!] as Vec2);
}

/** Does the inferred point land inside the convex hull of a labelled cluster? */
export function inCluster(point: Vec2, users: LatentUser[], kind: LabelKind, value: string): boolean {
  const cluster = clusterPoints(users, kind, value);
  if (cluster.length < 3) return false;
  return pointInHull(point, convexHull(cluster));
}

export class LatentScatter {
  users: LatentUser[] = [];
  inferred: Vec2 | null = null;
  labelKind: LabelKind = "handedness";

  constructor(readonly canvas: HTMLCanvasElement) {}

  private mapping(): CanvasMapping {
    const xs = this.users.map((u) => u.mu[0] ?? 0).concat(this.inferred ? [this.inferred[0]] : []);
    const ys = this.users.map((u) => u.mu[1] ?? 0).concat(this.inferred ? [this.inferred[1]] : []);
    const pad = 0.1;
    const xmin = Math.min(-0.5, ...xs) - pad;
    const xmax = Math.max(0.5, ...xs) + pad;
    const ymin = Math.min(-0.5, ...ys) - pad;
    const ymax = Math.max(0.5, ...ys) + pad;
    return new CanvasMapping([xmin, xmax, ymin, ymax], this.canvas.width, this.canvas.height, 12);
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    const mapping = this.mapping();
    // cluster hulls
    const values = this.labelKind === "handedness" ? ["left", "right"] : ["colour", "shape"];
    for (const value of values) {
      const pts = clusterPoints(this.users, this.labelKind, value);
      if (pts.length >= 3) {
        const hull = convexHull(pts).map((p) => mapping.toPixel(p));
        ctx.beginPath();
        hull.forEach((p, i) => (i === 0 ? ctx.moveTo(p[0], p[1]) : ctx.lineTo(p[0], p[1])));
        ctx.closePath();
        ctx.fillStyle = LABEL_COLOURS[value] + "22";
        ctx.strokeStyle = LABEL_COLOURS[value] ?? "#888";
        ctx.fill();
        ctx.stroke();
      }
    }
    for (const user of this.users) {
      if (user.mu.length < 2) continue;
      const [px, py] = mapping.toPixel([user.mu[0]!, user.mu[1]!]);
      ctx.fillStyle = LABEL_COLOURS[user[this.labelKind] ?? ""] ?? "#95a5a6";
      ctx.beginPath();
      ctx.arc(px, py, 4, 0, Math.PI * 2);
      ctx.fill();
    }
    if (this.inferred) {
      const [px, py] = mapping.toPixel(this.inferred);
      ctx.strokeStyle = "#111";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(px - 7, py);
      ctx.lineTo(px + 7, py);
      ctx.moveTo(px, py - 7);
      ctx.lineTo(px, py + 7);
      ctx.stroke();
      ctx.lineWidth = 1;
      ctx.fillStyle = "#111";
      ctx.font = "11px sans-serif";
      ctx.fillText("you", px + 9, py - 6);
    }
  }
}
