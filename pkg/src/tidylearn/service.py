"""HTTP inference service backing the browser arranger.

Stateless JSON endpoints over one immutable loaded model: infer a
preference vector from scenes, predict arrangements, run baselines, and
expose exported training-user latents for the scatter view. Positions
cross the wire in denormalised metres.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .baselines import BaselineContext, knn_scene_projection, mean_position, random_position, user_copy
from .model import (
    ModelMismatchError,
    PreferenceModel,
    decode_positions,
    encode_user,
    infer_mean,
)
from .scenes import DataError, Dataset, scene_from_json
from .semantics import OovError, load_bundled_table


class SceneBody(BaseModel):
    template: str
    positions: list[list[float]]
    placed: list[bool] | None = None


class InferBody(BaseModel):
    scenes: list[SceneBody] = Field(min_length=1)


class PredictBody(BaseModel):
    user_mu: list[float]
    template: str
    mask: list[int] | None = None
    extra_objects: list[str] | None = None


class BaselineBody(BaseModel):
    method: str
    template: str
    scenes: list[SceneBody] = Field(default_factory=list)
    object: str | None = None
    seed: int = 0


def make_app(model: PreferenceModel, latents: dict | None = None,
             train_dataset: Dataset | None = None) -> FastAPI:
    app = FastAPI(title="tidylearn service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    table = model.codec.table or load_bundled_table()

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.exception_handler(DataError)
    async def data_error(request: Request, exc: DataError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(OovError)
    async def oov_error(request: Request, exc: OovError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(ModelMismatchError)
    async def mismatch(request: Request, exc: ModelMismatchError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    def known_template_or_404(template: str):
        if template not in model.registry:
            raise TemplateNotFound(template)

    class TemplateNotFound(Exception):
        def __init__(self, template: str):
            self.template = template

    @app.exception_handler(TemplateNotFound)
    async def not_found(request: Request, exc: TemplateNotFound):
        return JSONResponse(status_code=404,
                            content={"error": f"unknown template {exc.template!r}"})

    def to_scenes(bodies: list[SceneBody]):
        scenes = []
        for body in bodies:
            known_template_or_404(body.template)
            scenes.append(scene_from_json(body.model_dump(), model.registry))
        return scenes

    @app.get("/health")
    def health():
        return {"ok": True, "latent_dim": model.cfg.d_u}

    @app.get("/templates")
    def templates():
        out = []
        for spec in model.registry.values():
            out.append({
                "id": spec.template_id,
                "objects": list(spec.object_names),
                "extent": list(spec.extent) if spec.extent else None,
                "object_radius": spec.object_radius,
            })
        return {"templates": out}

    @app.post("/infer")
    def infer(body: InferBody):
        post = encode_user(model, to_scenes(body.scenes))
        return {"user_mu": infer_mean(post).tolist(),
                "user_logvar": post.logvar.data.reshape(-1).tolist()}

    @app.post("/predict")
    def predict(body: PredictBody):
        known_template_or_404(body.template)
        mu = np.asarray(body.user_mu, dtype=np.float64)
        positions = decode_positions(model, mu, body.template,
                                     extra_names=body.extra_objects)
        names = (list(model.registry[body.template].object_names)
                 + list(body.extra_objects or []))
        mask = body.mask or []
        if any(not 0 <= m < len(names) for m in mask):
            raise DataError("mask index out of range for this roster")
        return {"template": body.template, "names": names,
                "positions": positions.tolist(), "mask": mask}

    @app.post("/baseline")
    def baseline(body: BaselineBody):
        known_template_or_404(body.template)
        if train_dataset is None:
            raise ModelMismatchError(
                "service started without a training dataset; baselines unavailable")
        ctx = BaselineContext(train_dataset, to_scenes(body.scenes),
                              seed=body.seed, table=table)
        method = body.method
        if method in ("positive_example", "random_user"):
            positions = user_copy(method, ctx, body.template)
        elif method == "mean_position":
            spec = model.registry[body.template]
            positions = np.stack([mean_position(ctx, body.template, n)
                                  for n in spec.object_names])
        elif method == "random_position":
            positions = random_position(ctx, body.template)[None, :]
        elif method == "knn_scene_projection":
            if not body.scenes:
                raise DataError("knn_scene_projection needs example scenes")
            positions = knn_scene_projection(ctx, body.scenes[0].template,
                                             body.template)
        else:
            raise DataError(f"unknown baseline method {method!r}")
        return {"template": body.template, "method": method,
                "positions": np.asarray(positions).tolist()}

    @app.get("/latents")
    def get_latents():
        if latents is None:
            return {"users": []}
        return {"users": latents.get("users", [])}

    return app
