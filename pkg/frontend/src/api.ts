/** Typed client for the inference service; one in-flight request per kind. */

import type {
  InferenceResult,
  LatentUser,
  PredictionResult,
  SceneBody,
  TemplateInfo,
  Vec2,
} from "./types.js";

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  private controllers = new Map<string, AbortController>();

  constructor(readonly baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  /** Later submissions of the same kind abort the earlier in-flight one. */
  private signalFor(kind: string): AbortSignal {
    this.controllers.get(kind)?.abort();
    const controller = new AbortController();
    this.controllers.set(kind, controller);
    return controller.signal;
  }

  private async request<T>(kind: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method: body === undefined ? "GET" : "POST",
      headers: { "content-type": "application/json" },
      signal: this.signalFor(kind),
    };
    if (body !== undefined) init.body = JSON.stringify(body);
    const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const payload = await res.json().catch(() => ({}));
    if (!res.ok) {
      const message = (payload as { error?: string }).error ?? res.statusText;
      throw new ServiceError(res.status, message);
    }
    return payload as T;
  }

  templates(): Promise<{ templates: TemplateInfo[] }> {
    return this.request("templates", "/templates");
  }

  latents(): Promise<{ users: LatentUser[] }> {
    return this.request("latents", "/latents");
  }

  infer(scenes: SceneBody[]): Promise<InferenceResult> {
    return this.request("infer", "/infer", { scenes });
  }

  predict(
    userMu: number[],
    template: string,
    mask?: number[],
    extraObjects?: string[],
  ): Promise<PredictionResult> {
    return this.request("predict", "/predict", {
      user_mu: userMu,
      template,
      mask: mask ?? null,
      extra_objects: extraObjects ?? null,
    });
  }

  baseline(
    method: string,
    template: string,
    scenes: SceneBody[],
    seed = 0,
  ): Promise<{ positions: Vec2[] | number[][]; method: string }> {
    return this.request("baseline", "/baseline", { method, template, scenes, seed });
  }
}
