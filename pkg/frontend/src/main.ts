/** Wiring: editors per template, infer flow, predict-and-compare panel. */

import { ApiClient, ServiceError } from "./api.js";
import { SceneEditor } from "./editor.js";
import { LatentScatter, inCluster } from "./scatter.js";
import {
  adoptPrediction,
  arrangedScenes,
  canInfer,
  deserialize,
  ghostsFromPrediction,
  initialState,
  serialize,
  withInference,
} from "./state.js";
import type { AppState, LatentUser, PredictionView, TemplateInfo, Vec2 } from "./types.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8008";
const STORAGE_KEY = "tidylearn-arranger";

const api = new ApiClient(SERVICE_URL);
let state: AppState = initialState([]);
let latentUsers: LatentUser[] = [];
let editor: SceneEditor | null = null;
let compareEditor: SceneEditor | null = null;
let scatter: LatentScatter | null = null;
let activeTemplate = "";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function banner(message: string, retry: (() => void) | null): void {
  const el = $("banner");
  el.innerHTML = "";
  if (!message) {
    el.hidden = true;
    return;
  }
  el.hidden = false;
  el.append(message + " ");
  if (retry) {
    const btn = document.createElement("button");
    btn.textContent = "retry";
    btn.onclick = () => {
      banner("", null);
      retry();
    };
    el.append(btn);
  }
}

function persist(): void {
  localStorage.setItem(STORAGE_KEY, serialize(state));
}

function template(id: string): TemplateInfo | undefined {
  return state.templates.find((t) => t.id === id);
}

function renderEditor(): void {
  const info = template(activeTemplate);
  if (!info) return;
  const canvas = $("editor") as unknown as HTMLCanvasElement;
  editor = new SceneEditor(canvas, info, state.scenes[activeTemplate]!);
  editor.onChange = (scene) => {
    state = { ...state, scenes: { ...state.scenes, [activeTemplate]: scene } };
    persist();
    updateControls();
  };
}

function updateControls(): void {
  ($("infer-btn") as HTMLButtonElement).disabled = !canInfer(state);
  ($("predict-btn") as HTMLButtonElement).disabled = state.lastInference === null;
  ($("adopt-btn") as HTMLButtonElement).disabled = state.prediction === null;
  const mu = state.lastInference?.user_mu;
  $("latent-readout").textContent = mu
    ? `u = (${mu.map((v) => v.toFixed(3)).join(", ")})`
    : "no inference yet";
  if (scatter) {
    scatter.users = latentUsers;
    scatter.inferred = mu && mu.length >= 2 ? [mu[0]!, mu[1]!] : null;
    scatter.render();
    const point = scatter.inferred;
    let note = "";
    if (point) {
      for (const [kind, values] of [
        ["handedness", ["left", "right"]],
        ["grouping", ["colour", "shape"]],
      ] as const) {
        for (const value of values) {
          if (inCluster(point, latentUsers, kind, value)) note += ` ${value}-cluster`;
        }
      }
    }
    $("cluster-readout").textContent = note ? `inside:${note}` : "";
  }
}

async function runInfer(): Promise<void> {
  try {
    const result = await api.infer(arrangedScenes(state));
    state = withInference(state, result);
    persist();
    updateControls();
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    banner(`inference failed: ${(err as Error).message}`, runInfer);
  }
}

async function runPredict(): Promise<void> {
  const method = ($("method-select") as HTMLSelectElement).value;
  const target = ($("target-select") as HTMLSelectElement).value;
  const maskSel = ($("mask-select") as HTMLSelectElement).value;
  const info = template(target);
  if (!info || !state.lastInference) return;
  const mask = maskSel === "" ? [] : [Number(maskSel)];
  try {
    let view: PredictionView;
    if (method === "neatnet") {
      const res = await api.predict(state.lastInference.user_mu, target, mask);
      view = { method, ...res };
    } else {
      const res = await api.baseline(method, target, arrangedScenes(state));
      const positions = res.positions as Vec2[];
      view = { method, template: target, names: info.objects, positions, mask };
    }
    state = { ...state, prediction: view };
    renderPrediction();
    updateControls();
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    const status = err instanceof ServiceError ? ` (${err.status})` : "";
    banner(`prediction failed${status}: ${(err as Error).message}`, runPredict);
  }
}

function renderPrediction(): void {
  const pred = state.prediction;
  const info = pred ? template(pred.template) : undefined;
  const canvas = $("compare") as unknown as HTMLCanvasElement;
  if (!pred || !info) return;
  const placed = pred.names.map((_, i) => !pred.mask.includes(i));
  compareEditor = new SceneEditor(
    canvas,
    info,
    {
      template: pred.template,
      positions: pred.positions.map((p) => [p[0], p[1]] as Vec2).slice(0, info.objects.length),
      placed: placed.slice(0, info.objects.length),
    },
    true,
  );
  // exactly one ghost per masked index: predicted spot for the hidden object
  compareEditor.ghost = ghostsFromPrediction(pred)[0] ?? null;
  compareEditor.render();
  compareEditor.onChange = (scene) => {
    // drag-to-correct: keep the corrected positions in the prediction view
    state = {
      ...state,
      prediction: { ...pred, positions: scene.positions.map((p) => [p[0], p[1]] as Vec2) },
    };
  };
  $("prediction-title").textContent = `${pred.method} → ${pred.template}`;
}

function populateSelectors(): void {
  const tabs = $("template-tabs");
  tabs.innerHTML = "";
  for (const t of state.templates) {
    const btn = document.createElement("button");
    btn.textContent = t.id;
    btn.className = t.id === activeTemplate ? "tab active" : "tab";
    btn.onclick = () => {
      activeTemplate = t.id;
      populateSelectors();
      renderEditor();
      updateControls();
    };
    tabs.append(btn);
  }
  const target = $("target-select") as HTMLSelectElement;
  target.innerHTML = "";
  for (const t of state.templates) {
    const opt = document.createElement("option");
    opt.value = t.id;
    opt.textContent = t.id;
    target.append(opt);
  }
  target.value = activeTemplate;
  target.onchange = populateMask;
  populateMask();
}

function populateMask(): void {
  const target = ($("target-select") as HTMLSelectElement).value;
  const info = template(target);
  const sel = $("mask-select") as HTMLSelectElement;
  sel.innerHTML = "<option value=''>none</option>";
  for (const [i, name] of (info?.objects ?? []).entries()) {
    const opt = document.createElement("option");
    opt.value = String(i);
    opt.textContent = name;
    sel.append(opt);
  }
}

async function boot(): Promise<void> {
  try {
    const [tpl, lat] = await Promise.all([api.templates(), api.latents()]);
    latentUsers = lat.users;
    const stored = localStorage.getItem(STORAGE_KEY);
    state = stored
      ? deserialize(stored, tpl.templates)
      : initialState(tpl.templates);
    state = { ...state, templates: tpl.templates };
    activeTemplate = tpl.templates[0]?.id ?? "";
    scatter = new LatentScatter($("scatter") as unknown as HTMLCanvasElement);
    populateSelectors();
    renderEditor();
    updateControls();
    banner("", null);
  } catch (err) {
    banner(`service unreachable at ${SERVICE_URL}: ${(err as Error).message}`, boot);
  }
}

window.addEventListener("load", () => {
  $("infer-btn").onclick = runInfer;
  $("predict-btn").onclick = runPredict;
  $("adopt-btn").onclick = () => {
    state = adoptPrediction(state);
    persist();
    renderEditor();
    void runInfer();
  };
  ($("label-kind") as HTMLSelectElement).onchange = (e) => {
    if (scatter) {
      scatter.labelKind = (e.target as HTMLSelectElement).value as "handedness" | "grouping";
      scatter.render();
    }
  };
  void boot();
});
