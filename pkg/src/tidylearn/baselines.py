"""Non-neural comparison methods: static positions, word-vector kNN, copies.

Every baseline is a pure function of an immutable context plus an
explicit seed, so repeated evaluations reproduce exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenes import DataError, Dataset, Scene
from .semantics import EmbeddingTable

KNN_EPSILON = 1e-6


@dataclass
class BaselineConfig:
    """Quantified constants for the informally-specified placements."""

    offset_fraction: float = 0.05   # random offset radius as share of extent
    max_offset_resamples: int = 20
    k: int = 3


@dataclass
class BaselineContext:
    train: Dataset
    user_scenes: list[Scene]
    seed: int = 0
    table: EmbeddingTable | None = None
    config: BaselineConfig = field(default_factory=BaselineConfig)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def user_scene(self, template: str) -> Scene:
        for scene in self.user_scenes:
            if scene.template == template:
                return scene
        raise DataError(f"test user has no scene for template {template!r}")


# -- static-position family ----------------------------------------------------


def mean_position(ctx: BaselineContext, template: str, object_name: str,
                  occurrence: int = 0) -> np.ndarray:
    """Arithmetic mean of the object's placed positions across training scenes."""
    rows = []
    for scene in ctx.train.scenes_of(template):
        hits = [o for o in scene.objects if o.name == object_name and o.placed]
        if len(hits) > occurrence:
            rows.append(hits[occurrence].position)
    if not rows:
        raise DataError(
            f"object {object_name!r} never placed in training scenes of {template!r}")
    return np.mean(rows, axis=0)


def random_position(ctx: BaselineContext, template: str) -> np.ndarray:
    """Uniform draw over the template's bounding region."""
    spec = ctx.train.registry.get(template)
    if spec is None or spec.extent is None:
        raise DataError(f"template {template!r} has no extent for random placement")
    xmin, xmax, ymin, ymax = spec.extent
    rng = ctx.rng()
    return np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])


def mean_with_offset(ctx: BaselineContext, template: str) -> np.ndarray:
    """Centroid of the scene's other objects plus a small anti-overlap offset."""
    scene = ctx.user_scene(template)
    placed = [o.position for o in scene.objects if o.placed]
    if not placed:
        raise DataError("mean_with_offset needs at least one placed object")
    placed = np.stack(placed)
    centroid = placed.mean(axis=0)
    spec = ctx.train.registry[template]
    radius = ctx.config.offset_fraction * spec.extent_scalar()
    rng = ctx.rng()
    candidate = centroid
    for _ in range(ctx.config.max_offset_resamples):
        angle = rng.uniform(0, 2 * np.pi)
        r = radius * np.sqrt(rng.uniform())
        candidate = centroid + r * np.array([np.cos(angle), np.sin(angle)])
        clear = np.linalg.norm(placed - candidate, axis=1).min() >= spec.object_radius
        if clear:
            break
    return candidate


def static_position(kind: str, ctx: BaselineContext, template: str,
                    object_name: str | None = None) -> np.ndarray:
    if kind == "mean":
        if object_name is None:
            raise ValueError("mean placement needs the target object name")
        return mean_position(ctx, template, object_name)
    if kind == "random":
        return random_position(ctx, template)
    if kind == "mean_with_offset":
        return mean_with_offset(ctx, template)
    raise ValueError(f"unknown static baseline {kind!r}")


# -- word-vector nearest-neighbour family -----------------------------------------


def _anchor_set(ctx: BaselineContext, scene: Scene,
                new_object: str) -> tuple[list[str], np.ndarray, np.ndarray]:
    if ctx.table is None:
        raise DataError("kNN baselines need an embedding table")
    names, positions, vecs = [], [], []
    target = ctx.table.lookup(new_object)
    for obj in scene.objects:
        if not obj.placed or obj.name not in ctx.table:
            continue
        names.append(obj.name)
        positions.append(obj.position)
        vecs.append(ctx.table.lookup(obj.name))
    if not names:
        raise DataError("no placed anchors with word vectors available")
    dists = np.linalg.norm(np.stack(vecs) - target, axis=1)
    return names, np.stack(positions), dists


def nearest_neighbour(ctx: BaselineContext, template: str,
                      new_object: str) -> np.ndarray:
    """Adjacent to the single word-closest object, nudged away from the centroid."""
    scene = ctx.user_scene(template)
    _, positions, dists = _anchor_set(ctx, scene, new_object)
    anchor = positions[int(np.argmin(dists))]
    centroid = positions.mean(axis=0)
    direction = anchor - centroid
    norm = np.linalg.norm(direction)
    unit = direction / norm if norm > 1e-12 else np.array([1.0, 0.0])
    radius = ctx.train.registry[template].object_radius
    return anchor + radius * unit


def weighted_knn(ctx: BaselineContext, template: str, new_object: str,
                 k: int | None = None) -> tuple[np.ndarray, dict]:
    """Inverse-word-distance weighted average of the k nearest anchors."""
    scene = ctx.user_scene(template)
    _, positions, dists = _anchor_set(ctx, scene, new_object)
    k = k or ctx.config.k
    meta = {"fallback": False, "k": min(k, len(dists))}
    if len(dists) < k:
        meta["fallback"] = True
    order = np.argsort(dists)[:meta["k"]]
    w = 1.0 / (dists[order] + KNN_EPSILON)
    return (w[:, None] * positions[order]).sum(axis=0) / w.sum(), meta


def knn_scene_projection(ctx: BaselineContext, example_template: str,
                         new_template: str, k: int | None = None) -> np.ndarray:
    """Place every object of the new scene by weighted kNN over the example."""
    spec = ctx.train.registry.get(new_template)
    if spec is None:
        raise DataError(f"unknown template {new_template!r}")
    rows = [weighted_knn(ctx, example_template, name, k)[0]
            for name in spec.object_names]
    return np.stack(rows)


def knn_place(kind: str, ctx: BaselineContext, template: str,
              new_object: str | None = None, new_template: str | None = None,
              k: int | None = None):
    if kind == "nearest":
        return nearest_neighbour(ctx, template, new_object)
    if kind == "weighted_knn":
        return weighted_knn(ctx, template, new_object, k)[0]
    if kind == "scene_projection":
        return knn_scene_projection(ctx, template, new_template, k)
    raise ValueError(f"unknown kNN baseline {kind!r}")


# -- user-copy family ---------------------------------------------------------------


def positive_example(ctx: BaselineContext, template: str) -> np.ndarray:
    """The test user's own arrangement, copied verbatim."""
    scene = ctx.user_scene(template)
    return scene.positions().copy()


def random_user(ctx: BaselineContext, template: str) -> np.ndarray:
    """A seed-deterministic copy of one training user's arrangement."""
    candidates = []
    for user in ctx.train.users:
        for scene in user.scenes:
            if scene.template == template:
                candidates.append(scene)
    if not candidates:
        raise DataError(f"no training user arranged template {template!r}")
    pick = ctx.rng().integers(len(candidates))
    return candidates[pick].positions().copy()


def user_copy(kind: str, ctx: BaselineContext, template: str) -> np.ndarray:
    if kind == "positive_example":
        return positive_example(ctx, template)
    if kind == "random_user":
        return random_user(ctx, template)
    raise ValueError(f"unknown copy baseline {kind!r}")
