/** Canvas scene editor: drag objects around, park them in an inventory strip. */

import { CanvasMapping, distance } from "./geometry.js";
import type { EditorSceneState, TemplateInfo, Vec2 } from "./types.js";

const INVENTORY_H = 56;
const COLOURS: Record<string, string> = { red: "#c0392b", blue: "#2471a3" };

function spriteColour(name: string): string {
  for (const key of Object.keys(COLOURS)) {
    if (name.includes(key)) return COLOURS[key]!;
  }
  return "#5d6d7e";
}

function isRound(name: string): boolean {
  return name.includes("ball") || ["plate", "cup", "mug", "bowl"].includes(name);
}

export interface GhostSpec {
  index: number;
  position: Vec2;
}

export class SceneEditor {
  private mapping: CanvasMapping;
  private dragIndex: number | null = null;
  onChange: ((scene: EditorSceneState) => void) | null = null;
  /** null renders read-only (comparison panels). */
  scene: EditorSceneState;
  ghost: GhostSpec | null = null;

  constructor(
    readonly canvas: HTMLCanvasElement,
    readonly template: TemplateInfo,
    scene: EditorSceneState,
    readonly editable = true,
  ) {
    this.scene = scene;
    const extent = template.extent ?? [-0.5, 0.5, -0.4, 0.4];
    this.mapping = new CanvasMapping(extent, canvas.width, canvas.height - INVENTORY_H);
    if (editable) {
      canvas.addEventListener("pointerdown", (e) => this.onDown(e));
      canvas.addEventListener("pointermove", (e) => this.onMove(e));
      canvas.addEventListener("pointerup", (e) => this.onUp(e));
    }
    this.render();
  }

  setScene(scene: EditorSceneState): void {
    this.scene = scene;
    this.render();
  }

  private canvasPoint(e: PointerEvent): Vec2 {
    const rect = this.canvas.getBoundingClientRect();
    return [
      ((e.clientX - rect.left) * this.canvas.width) / rect.width,
      ((e.clientY - rect.top) * this.canvas.height) / rect.height,
    ];
  }

  private inventorySlots(): Vec2[] {
    const unplaced = this.scene.placed.map((f, i) => (f ? -1 : i)).filter((i) => i >= 0);
    const y = this.canvas.height - INVENTORY_H / 2;
    return unplaced.map((_, k) => [36 + k * 64, y] as Vec2);
  }

  private hitTest(point: Vec2): number | null {
    const radius = Math.max(this.mapping.pixelRadius(this.template.object_radius), 14);
    for (let i = 0; i < this.scene.positions.length; i++) {
      if (!this.scene.placed[i]) continue;
      if (distance(this.mapping.toPixel(this.scene.positions[i]!), point) <= radius + 4) {
        return i;
      }
    }
    const unplaced = this.scene.placed.map((f, i) => (f ? -1 : i)).filter((i) => i >= 0);
    const slots = this.inventorySlots();
    for (let k = 0; k < slots.length; k++) {
      if (distance(slots[k]!, point) <= 26) return unplaced[k]!;
    }
    return null;
  }

  private onDown(e: PointerEvent): void {
    this.dragIndex = this.hitTest(this.canvasPoint(e));
    if (this.dragIndex !== null) this.canvas.setPointerCapture(e.pointerId);
  }

  private onMove(e: PointerEvent): void {
    if (this.dragIndex === null) return;
    const p = this.canvasPoint(e);
    if (p[1] < this.canvas.height - INVENTORY_H) {
      this.scene = {
        ...this.scene,
        positions: this.scene.positions.map((q, i) =>
          i === this.dragIndex ? this.mapping.toMetre(p) : q,
        ),
        placed: this.scene.placed.map((f, i) => (i === this.dragIndex ? true : f)),
      };
      this.render();
    }
  }

  private onUp(e: PointerEvent): void {
    if (this.dragIndex === null) return;
    const p = this.canvasPoint(e);
    if (p[1] >= this.canvas.height - INVENTORY_H) {
      this.scene = {
        ...this.scene,
        placed: this.scene.placed.map((f, i) => (i === this.dragIndex ? false : f)),
      };
    }
    this.dragIndex = null;
    this.render();
    this.onChange?.(this.scene);
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    // table surface
    const [xmin, xmax, ymin, ymax] = this.template.extent ?? [-0.5, 0.5, -0.4, 0.4];
    const tl = this.mapping.toPixel([xmin, ymax]);
    const br = this.mapping.toPixel([xmax, ymin]);
    ctx.fillStyle = "#fdf6ec";
    ctx.strokeStyle = "#b8a88a";
    ctx.fillRect(tl[0], tl[1], br[0] - tl[0], br[1] - tl[1]);
    ctx.strokeRect(tl[0], tl[1], br[0] - tl[0], br[1] - tl[1]);
    // inventory strip
    ctx.fillStyle = "#eef1f4";
    ctx.fillRect(0, height - INVENTORY_H, width, INVENTORY_H);
    ctx.fillStyle = "#7f8c8d";
    ctx.font = "11px sans-serif";
    ctx.fillText("inventory", 8, height - INVENTORY_H + 14);

    const slots = this.inventorySlots();
    const unplaced = this.scene.placed.map((f, i) => (f ? -1 : i)).filter((i) => i >= 0);
    unplaced.forEach((objIndex, k) =>
      this.drawObject(ctx, objIndex, slots[k]!, { ghost: false }),
    );
    this.scene.placed.forEach((placedFlag, i) => {
      if (placedFlag) {
        this.drawObject(ctx, i, this.mapping.toPixel(this.scene.positions[i]!), {
          ghost: false,
        });
      }
    });
    if (this.ghost) {
      this.drawObject(ctx, this.ghost.index, this.mapping.toPixel(this.ghost.position), {
        ghost: true,
      });
    }
  }

  private drawObject(
    ctx: CanvasRenderingContext2D,
    index: number,
    at: Vec2,
    opts: { ghost: boolean },
  ): void {
    const name = this.template.objects[index] ?? `#${index}`;
    const r = Math.max(this.mapping.pixelRadius(this.template.object_radius), 12);
    ctx.save();
    if (opts.ghost) {
      ctx.globalAlpha = 0.45;
      ctx.setLineDash([4, 3]);
    }
    ctx.fillStyle = spriteColour(name);
    ctx.strokeStyle = "#2c3e50";
    ctx.beginPath();
    if (isRound(name)) {
      ctx.arc(at[0], at[1], r, 0, Math.PI * 2);
    } else {
      ctx.rect(at[0] - r, at[1] - r, 2 * r, 2 * r);
    }
    ctx.fill();
    ctx.stroke();
    ctx.restore();
    ctx.fillStyle = "#2c3e50";
    ctx.font = "10px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(name, at[0], at[1] + r + 11);
    ctx.textAlign = "start";
  }
}
