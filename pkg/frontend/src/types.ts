/** Wire types for the tidylearn HTTP API plus editor state shapes. */

export type Vec2 = [number, number];

export interface TemplateInfo {
  id: string;
  objects: string[];
  /** [xmin, xmax, ymin, ymax] in metres; null when the model has none. */
  extent: [number, number, number, number] | null;
  object_radius: number;
}

export interface SceneBody {
  template: string;
  positions: Vec2[];
  placed: boolean[];
}

export interface InferenceResult {
  user_mu: number[];
  user_logvar: number[];
}

export interface PredictionResult {
  template: string;
  names: string[];
  positions: Vec2[];
  mask: number[];
}

export interface LatentUser {
  id: string;
  mu: number[];
  handedness?: string;
  grouping?: string;
}

/** One editable scene: positions in metres, placed=false means "in inventory". */
export interface EditorSceneState {
  template: string;
  positions: Vec2[];
  placed: boolean[];
}

export interface PredictionView {
  method: string;
  template: string;
  names: string[];
  positions: Vec2[];
  mask: number[];
}

export interface AppState {
  templates: TemplateInfo[];
  scenes: Record<string, EditorSceneState>;
  lastInference: InferenceResult | null;
  prediction: PredictionView | null;
}
