/**
 * Editor state: pure data plus pure transition helpers. The whole UI can be
 * re-rendered from (template registry, scenes, last inference response), so
 * refreshing the page restores the session from a serialized snapshot.
 */

import type {
  AppState,
  EditorSceneState,
  InferenceResult,
  SceneBody,
  TemplateInfo,
  Vec2,
} from "./types.js";

export function emptyScene(template: TemplateInfo): EditorSceneState {
  return {
    template: template.id,
    positions: template.objects.map(() => [0, 0] as Vec2),
    placed: template.objects.map(() => false),
  };
}

export function initialState(templates: TemplateInfo[]): AppState {
  const scenes: Record<string, EditorSceneState> = {};
  for (const t of templates) scenes[t.id] = emptyScene(t);
  return { templates, scenes, lastInference: null, prediction: null };
}

export function placeObject(
  scene: EditorSceneState,
  index: number,
  position: Vec2,
): EditorSceneState {
  const positions = scene.positions.map((p, i) => (i === index ? position : p));
  const placed = scene.placed.map((f, i) => (i === index ? true : f));
  return { ...scene, positions, placed };
}

export function removeObject(scene: EditorSceneState, index: number): EditorSceneState {
  const placed = scene.placed.map((f, i) => (i === index ? false : f));
  return { ...scene, placed };
}

/** Scenes with at least one placed object, as wire bodies. */
export function arrangedScenes(state: AppState): SceneBody[] {
  return Object.values(state.scenes)
    .filter((s) => s.placed.some(Boolean))
    .map((s) => ({ template: s.template, positions: s.positions, placed: s.placed }));
}

/** Inference is pointless until something has been arranged. */
export function canInfer(state: AppState): boolean {
  return arrangedScenes(state).length > 0;
}

export function withInference(state: AppState, result: InferenceResult): AppState {
  return { ...state, lastInference: result };
}

/** Adopt a (possibly corrected) prediction as the editor scene, for re-inference. */
export function adoptPrediction(state: AppState): AppState {
  const pred = state.prediction;
  if (!pred) return state;
  const template = state.templates.find((t) => t.id === pred.template);
  if (!template) return state;
  const roster = pred.positions.slice(0, template.objects.length);
  const scene: EditorSceneState = {
    template: pred.template,
    positions: roster.map((p) => [p[0], p[1]] as Vec2),
    placed: roster.map(() => true),
  };
  return { ...state, scenes: { ...state.scenes, [pred.template]: scene } };
}

/**
 * A masked prediction renders the hidden object as exactly one ghost marker
 * at its predicted position; unmasked predictions render no ghost.
 */
export function ghostsFromPrediction(
  pred: { positions: Vec2[]; mask: number[] } | null,
): { index: number; position: Vec2 }[] {
  if (!pred) return [];
  return pred.mask
    .filter((m) => m >= 0 && m < pred.positions.length)
    .map((m) => ({ index: m, position: [pred.positions[m]![0], pred.positions[m]![1]] as Vec2 }));
}

const STORAGE_VERSION = 1;

export function serialize(state: AppState): string {
  return JSON.stringify({
    version: STORAGE_VERSION,
    scenes: state.scenes,
    lastInference: state.lastInference,
  });
}

/** Restore a snapshot against the live registry; unknown data is dropped. */
export function deserialize(raw: string, templates: TemplateInfo[]): AppState {
  const state = initialState(templates);
  let snapshot: unknown;
  try {
    snapshot = JSON.parse(raw);
  } catch {
    return state;
  }
  if (typeof snapshot !== "object" || snapshot === null) return state;
  const snap = snapshot as {
    version?: number;
    scenes?: Record<string, EditorSceneState>;
    lastInference?: InferenceResult | null;
  };
  if (snap.version !== STORAGE_VERSION) return state;
  for (const t of templates) {
    const scene = snap.scenes?.[t.id];
    if (
      scene &&
      Array.isArray(scene.positions) &&
      scene.positions.length === t.objects.length &&
      Array.isArray(scene.placed) &&
      scene.placed.length === t.objects.length
    ) {
      state.scenes[t.id] = {
        template: t.id,
        positions: scene.positions.map((p) => [Number(p[0]), Number(p[1])] as Vec2),
        placed: scene.placed.map(Boolean),
      };
    }
  }
  if (snap.lastInference && Array.isArray(snap.lastInference.user_mu)) {
    state.lastInference = snap.lastInference;
  }
  return state;
}
