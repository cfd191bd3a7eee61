"""Scene/object data model, dataset JSON I/O, normalisation, masking, batching.

Positions are metres in the scene plane (D=2 by default). Values are
treated as immutable after construction; operations return fresh copies
and take an explicit numpy Generator wherever randomness is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .gnn import full_edges

SCHEMA_VERSION = 1


class DataError(ValueError):
    """Malformed dataset contents or incompatible scene structure."""


class MaskError(DataError):
    """A mask draw would leave the encoder with nothing to look at."""


@dataclass
class ObjectInstance:
    name: str
    position: np.ndarray | None = None     # (D,) metres, None when unplaced
    placed: bool = True
    features: np.ndarray | None = None     # hand-crafted semantic features
    onehot_index: int | None = None

    def __post_init__(self):
        if self.position is not None:
            self.position = np.asarray(self.position, dtype=np.float64)
        if self.placed:
            if self.position is None or not np.isfinite(self.position).all():
                raise DataError(f"placed object {self.name!r} needs a finite position")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)


@dataclass
class Scene:
    template: str
    objects: list[ObjectInstance]

    def __post_init__(self):
        if not self.objects:
            raise DataError("a scene needs at least one object")

    def __len__(self) -> int:
        return len(self.objects)

    def names(self) -> list[str]:
        return [o.name for o in self.objects]

    def positions(self) -> np.ndarray:
        """(n, D) matrix; unplaced objects contribute NaN rows."""
        dim = self.dim
        rows = [o.position if o.position is not None else np.full(dim, np.nan)
                for o in self.objects]
        return np.stack(rows)

    @property
    def dim(self) -> int:
        for o in self.objects:
            if o.position is not None:
                return len(o.position)
        return 2

    def placed_mask(self) -> np.ndarray:
        return np.array([o.placed for o in self.objects], dtype=bool)

    def with_positions(self, positions: np.ndarray, placed=None) -> "Scene":
        objs = []
        for i, o in enumerate(self.objects):
            is_placed = bool(placed[i]) if placed is not None else o.placed
            objs.append(replace(o, position=np.array(positions[i]), placed=is_placed))
        return Scene(self.template, objs)


@dataclass
class UserRecord:
    user_id: str
    scenes: list[Scene]

    def __post_init__(self):
        if not self.scenes:
            raise DataError(f"user {self.user_id!r} has no scenes")


@dataclass
class TemplateSpec:
    """Registry entry: roster plus canonical drawing extents."""

    template_id: str
    object_names: list[str]
    object_features: list[np.ndarray | None] = None
    extent: tuple[float, float, float, float] | None = None  # xmin,xmax,ymin,ymax
    object_radius: float = 0.04

    def __post_init__(self):
        if self.object_features is None:
            self.object_features = [None] * len(self.object_names)

    @property
    def size(self) -> int:
        return len(self.object_names)

    def extent_scalar(self) -> float:
        if self.extent is None:
            raise DataError(f"template {self.template_id!r} has no extent")
        xmin, xmax, ymin, ymax = self.extent
        return max(xmax - xmin, ymax - ymin)


@dataclass
class Dataset:
    users: list[UserRecord]
    registry: dict[str, TemplateSpec]
    stats: "dict[str, NormalizationStats] | None" = None

    def __post_init__(self):
        for user in self.users:
            for scene in user.scenes:
                if scene.template not in self.registry:
                    raise DataError(
                        f"scene template {scene.template!r} missing from registry")

    def scenes_of(self, template: str) -> list[Scene]:
        return [s for u in self.users for s in u.scenes if s.template == template]

    def filter_templates(self, templates: list[str]) -> "Dataset":
        users = []
        for u in self.users:
            kept = [s for s in u.scenes if s.template in templates]
            if kept:
                users.append(UserRecord(u.user_id, kept))
        registry = {t: self.registry[t] for t in templates}
        return Dataset(users, registry, self.stats)

    def split_users(self, n_test: int) -> tuple["Dataset", "Dataset"]:
        if n_test >= len(self.users):
            raise DataError("test split would consume the whole dataset")
        train = Dataset(self.users[:-n_test], self.registry)
        test = Dataset(self.users[-n_test:], self.registry)
        return train, test


# -- normalisation -----------------------------------------------------------


@dataclass
class NormalizationStats:
    """Per-template centring and radius scaling fit on training data."""

    mean: np.ndarray      # (D,)
    scale: float

    def apply(self, positions: np.ndarray) -> np.ndarray:
        return (np.asarray(positions, dtype=np.float64) - self.mean) / self.scale

    def invert(self, positions: np.ndarray) -> np.ndarray:
        return np.asarray(positions, dtype=np.float64) * self.scale + self.mean


def fit_normalizer(dataset: Dataset) -> dict[str, NormalizationStats]:
    """Mean position and max radius per template over all placed objects."""
    stats: dict[str, NormalizationStats] = {}
    for template in dataset.registry:
        rows = []
        for scene in dataset.scenes_of(template):
            pos = scene.positions()[scene.placed_mask()]
            rows.append(pos)
        if not rows or sum(len(r) for r in rows) == 0:
            raise DataError(f"no training positions for template {template!r}")
        pts = np.concatenate(rows)
        mean = pts.mean(axis=0)
        scale = float(np.linalg.norm(pts - mean, axis=1).max())
        if scale <= 0.0:
            scale = 1.0  # degenerate single-point template
        stats[template] = NormalizationStats(mean=mean, scale=scale)
    return stats


def normalize_scene(scene: Scene, stats: dict[str, NormalizationStats]) -> Scene:
    st = stats[scene.template]
    objs = [replace(o, position=None if o.position is None else st.apply(o.position))
            for o in scene.objects]
    return Scene(scene.template, objs)


def denormalize_positions(positions: np.ndarray, template: str,
                          stats: dict[str, NormalizationStats]) -> np.ndarray:
    return stats[template].invert(positions)


# -- augmentation and masking -------------------------------------------------


def augment_noise(scene: Scene, sigma: float, rng: np.random.Generator) -> Scene:
    """Independent Gaussian jitter on every placed coordinate."""
    if sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    if sigma == 0:
        return scene
    objs = []
    for o in scene.objects:
        if o.placed:
            objs.append(replace(o, position=o.position + rng.normal(0, sigma, len(o.position))))
        else:
            objs.append(replace(o))
    return Scene(scene.template, objs)


@dataclass
class MaskRecord:
    """Exactly what a mask draw hid from the encoder."""

    node_hidden: list[np.ndarray]   # bool per node, one array per scene
    scene_hidden: np.ndarray        # bool per scene

    def hidden_count(self) -> int:
        return int(sum(m.sum() for m in self.node_hidden))


def mask_scene(scene: Scene, node_rate: float, rng: np.random.Generator) -> tuple[Scene, np.ndarray]:
    if not 0.0 <= node_rate <= 1.0:
        raise ValueError("node mask rate must lie in [0, 1]")
    hidden = rng.random(len(scene)) < node_rate
    hidden &= scene.placed_mask()   # can only hide what was visible
    if hidden.all():
        raise MaskError("node mask would empty the scene")
    objs = [replace(o, placed=o.placed and not h)
            for o, h in zip(scene.objects, hidden)]
    return Scene(scene.template, objs), hidden


def mask_user(scenes: list[Scene], node_rate: float, scene_rate: float,
              rng: np.random.Generator) -> tuple[list[Scene], MaskRecord]:
    """Hide random nodes and whole scenes from the encoder view.

    Hidden scenes/nodes stay in the returned list (flagged unplaced or
    recorded) so they remain available as reconstruction targets.
    """
    if not 0.0 <= scene_rate <= 1.0:
        raise ValueError("scene mask rate must lie in [0, 1]")
    scene_hidden = rng.random(len(scenes)) < scene_rate
    if scene_hidden.all():
        raise MaskError("scene mask would hide every scene of the user")
    masked, node_hidden = [], []
    for scene, s_hidden in zip(scenes, scene_hidden):
        if s_hidden:
            masked.append(scene)
            node_hidden.append(np.zeros(len(scene), dtype=bool))
        else:
            m_scene, hidden = mask_scene(scene, node_rate, rng)
            masked.append(m_scene)
            node_hidden.append(hidden)
    return masked, MaskRecord(node_hidden=node_hidden, scene_hidden=scene_hidden)


# -- supergraph batching -------------------------------------------------------


@dataclass
class Supergraph:
    """Disjoint union of scene graphs: one forward pass, zero cross-scene edges."""

    positions: np.ndarray           # (N, D) stacked node positions
    names: list[str]
    edges: tuple[np.ndarray, np.ndarray]
    node_scene: np.ndarray          # (N,) scene index per node
    scene_user: np.ndarray          # (S,) user index per scene
    scenes: list[Scene]

    @property
    def num_nodes(self) -> int:
        return len(self.names)

    @property
    def num_scenes(self) -> int:
        return len(self.scene_user)


def build_supergraph(scenes: list[Scene], scene_user=None,
                     placed_only: bool = False) -> Supergraph:
    """Stack scenes into one graph; each scene stays fully connected internally.

    placed_only drops unplaced nodes (the encoder view); otherwise every
    node is kept (the decoder view).
    """
    if not scenes:
        raise DataError("cannot build a supergraph from zero scenes")
    if scene_user is None:
        scene_user = np.zeros(len(scenes), dtype=np.int64)
    positions, names, node_scene = [], [], []
    srcs, dsts = [], []
    offset = 0
    kept_scenes = []
    for s_idx, scene in enumerate(scenes):
        keep = scene.placed_mask() if placed_only else np.ones(len(scene), dtype=bool)
        objs = [o for o, k in zip(scene.objects, keep) if k]
        if not objs:
            raise MaskError(f"scene of template {scene.template!r} has no visible nodes")
        n = len(objs)
        for o in objs:
            positions.append(o.position if o.position is not None
                             else np.zeros(scene.dim))
            names.append(o.name)
            node_scene.append(s_idx)
        src, dst = full_edges(n)
        srcs.append(src + offset)
        dsts.append(dst + offset)
        offset += n
        kept_scenes.append(Scene(scene.template, objs))
    return Supergraph(
        positions=np.stack(positions),
        names=names,
        edges=(np.concatenate(srcs), np.concatenate(dsts)),
        node_scene=np.asarray(node_scene, dtype=np.int64),
        scene_user=np.asarray(scene_user, dtype=np.int64),
        scenes=kept_scenes,
    )


# -- JSON wire format ----------------------------------------------------------


def dataset_to_json(dataset: Dataset) -> dict:
    templates = []
    for spec in dataset.registry.values():
        objects = []
        for name, feats in zip(spec.object_names, spec.object_features):
            semantics: dict = {"word": name}
            if feats is not None:
                semantics["features"] = [float(v) for v in feats]
            objects.append({"name": name, "semantics": semantics})
        entry = {"id": spec.template_id, "objects": objects}
        if spec.extent is not None:
            entry["extent"] = list(spec.extent)
        templates.append(entry)
    users = []
    for user in dataset.users:
        scenes = []
        for scene in user.scenes:
            scenes.append({
                "template": scene.template,
                "positions": [[float(v) for v in (o.position if o.position is not None
                                                  else np.zeros(scene.dim))]
                              for o in scene.objects],
                "placed": [bool(o.placed) for o in scene.objects],
            })
        users.append({"id": user.user_id, "scenes": scenes})
    return {"schema_version": SCHEMA_VERSION, "templates": templates, "users": users}


def dataset_from_json(payload: dict) -> Dataset:
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise DataError(
            f"unsupported or missing schema_version (want {SCHEMA_VERSION})")
    registry: dict[str, TemplateSpec] = {}
    for entry in payload["templates"]:
        names = [o["name"] for o in entry["objects"]]
        feats = []
        for o in entry["objects"]:
            f = o.get("semantics", {}).get("features")
            feats.append(None if f is None else np.asarray(f, dtype=np.float64))
        extent = tuple(entry["extent"]) if "extent" in entry else None
        registry[entry["id"]] = TemplateSpec(
            template_id=entry["id"], object_names=names,
            object_features=feats, extent=extent)
    users = []
    for u in payload["users"]:
        scenes = []
        for s in u["scenes"]:
            spec = registry.get(s["template"])
            if spec is None:
                raise DataError(f"scene references unknown template {s['template']!r}")
            if len(s["positions"]) != spec.size:
                raise DataError(
                    f"scene of {s['template']!r} has {len(s['positions'])} positions, "
                    f"roster expects {spec.size}")
            placed = s.get("placed", [True] * spec.size)
            objs = [
                ObjectInstance(
                    name=spec.object_names[i],
                    position=np.asarray(s["positions"][i], dtype=np.float64),
                    placed=bool(placed[i]),
                    features=spec.object_features[i],
                    onehot_index=None,
                )
                for i in range(spec.size)
            ]
            scenes.append(Scene(s["template"], objs))
        users.append(UserRecord(u["id"], scenes))
    ds = Dataset(users, registry)
    _fill_missing_extents(ds)
    return ds


def _fill_missing_extents(dataset: Dataset) -> None:
    """Datasets without declared extents get data-driven bounding boxes."""
    for template, spec in dataset.registry.items():
        if spec.extent is not None:
            continue
        pts = [s.positions()[s.placed_mask()] for s in dataset.scenes_of(template)]
        pts = [p for p in pts if len(p)]
        if not pts:
            continue
        allp = np.concatenate(pts)
        margin = 0.05 * max(np.ptp(allp, axis=0).max(), 1e-6)
        spec.extent = (float(allp[:, 0].min() - margin), float(allp[:, 0].max() + margin),
                       float(allp[:, 1].min() - margin), float(allp[:, 1].max() + margin))


def scene_from_json(payload: dict, registry: dict[str, TemplateSpec]) -> Scene:
    """One scene dict ({"template", "positions", "placed"?}) -> Scene."""
    template = payload.get("template")
    spec = registry.get(template)
    if spec is None:
        raise DataError(f"unknown template {template!r}")
    positions = payload.get("positions")
    if positions is None or len(positions) != spec.size:
        raise DataError(
            f"scene of {template!r} needs exactly {spec.size} positions")
    placed = payload.get("placed")
    if placed is None:
        placed = [True] * spec.size
    if len(placed) != spec.size:
        raise DataError("placed flags must match the roster size")
    objs = [ObjectInstance(name=spec.object_names[i],
                           position=np.asarray(positions[i], dtype=np.float64),
                           placed=bool(placed[i]),
                           features=spec.object_features[i])
            for i in range(spec.size)]
    return Scene(template, objs)


def scene_to_json(scene: Scene) -> dict:
    return {
        "template": scene.template,
        "positions": [[float(v) for v in (o.position if o.position is not None
                                          else np.zeros(scene.dim))]
                      for o in scene.objects],
        "placed": [bool(o.placed) for o in scene.objects],
    }


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(dataset), indent=1, sort_keys=True))


def load_dataset(path: str | Path) -> Dataset:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"dataset file is not valid JSON: {exc}") from exc
    return dataset_from_json(payload)
