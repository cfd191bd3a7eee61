"""Deterministic synthetic users with known ground-truth preferences.

The stand-in for a human study: each user has a handedness, a grouping
mode for abstract scenes, a compactness multiplier, and placement noise.
Every layout constant lives in this file so experiment results can be
traced back to the generative geometry. Rule-based classifiers recover
the preference labels from noise-free arrangements with certainty,
which makes them usable as scoring oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenes import Dataset, ObjectInstance, Scene, TemplateSpec, UserRecord
from .semantics import feature_vector

TEMPLATES = ("abstract1", "abstract2", "dining", "office")

ABSTRACT_SIZES = {"tiny": 0.03, "small": 0.04, "medium": 0.06, "big": 0.09, "huge": 0.11}
COLOUR_RGB = {"red": (1.0, 0.0, 0.0), "blue": (0.0, 0.0, 1.0)}
SHAPE_CODE = {"box": 0.0, "ball": 1.0}

# four of six objects per roster change lines between the two grouping
# modes, so the modes are loud in reconstruction error and never
# degenerate into a line swap
ABSTRACT_ROSTERS = {
    "abstract1": ["big_red_ball", "small_red_ball", "huge_blue_box",
                  "small_blue_box", "medium_red_box", "medium_blue_ball"],
    "abstract2": ["medium_red_ball", "tiny_red_ball", "big_blue_box",
                  "medium_blue_box", "big_red_box", "tiny_blue_ball"],
}
ABSTRACT_LINE_Y = 0.15        # the two lines sit at +/- this
ABSTRACT_SPACING = 0.18       # x gap between in-line neighbours

# right-handed canonical place setting; left-handed mirrors x
DINING_LAYOUT = {
    "plate": (0.0, 0.0),
    "fork": (-0.18, 0.0),
    "knife": (0.18, 0.0),
    "spoon": (0.26, 0.0),
    "cup": (0.30, 0.18),
    "napkin": (-0.28, -0.02),
}

# right-handed canonical desk; left-handed mirrors x
OFFICE_LAYOUT = {
    "monitor": (0.0, 0.25),
    "keyboard": (0.0, -0.05),
    "mouse": (0.22, -0.05),
    "computer": (0.45, -0.25),
    "lamp": (-0.40, 0.28),
    "notepad": (-0.25, -0.10),
    "pencil": (-0.25, -0.18),
    "mug": (0.35, 0.10),
}
# where a (never-arranged) laptop belongs: the keyboard-side work area
OFFICE_LAPTOP_SLOT = (0.15, -0.12)

EXTENTS = {
    "abstract1": (-0.45, 0.45, -0.30, 0.30),
    "abstract2": (-0.45, 0.45, -0.30, 0.30),
    "dining": (-0.50, 0.50, -0.35, 0.35),
    "office": (-0.60, 0.60, -0.40, 0.40),
}

DEFAULT_NOISE = {"abstract1": 0.01, "abstract2": 0.01, "dining": 0.02, "office": 0.05}


def parse_abstract_name(name: str) -> tuple[float, str, str]:
    size_name, colour, shape = name.split("_")
    return ABSTRACT_SIZES[size_name], colour, shape


def abstract_features(name: str) -> np.ndarray:
    size, colour, shape = parse_abstract_name(name)
    return feature_vector(size, COLOUR_RGB[colour], SHAPE_CODE[shape])


def make_registry(include_laptop: bool = False) -> dict[str, TemplateSpec]:
    registry: dict[str, TemplateSpec] = {}
    for tid, roster in ABSTRACT_ROSTERS.items():
        registry[tid] = TemplateSpec(
            template_id=tid, object_names=list(roster),
            object_features=[abstract_features(n) for n in roster],
            extent=EXTENTS[tid])
    registry["dining"] = TemplateSpec(
        "dining", list(DINING_LAYOUT), extent=EXTENTS["dining"])
    office_names = list(OFFICE_LAYOUT) + (["laptop"] if include_laptop else [])
    registry["office"] = TemplateSpec(
        "office", office_names, extent=EXTENTS["office"])
    return registry


@dataclass
class SyntheticUserParams:
    handedness: str = "right"         # left | right
    grouping: str = "colour"          # colour | shape
    compactness: float = 1.0          # spacing multiplier
    noise_sigma: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_NOISE))
    seed: int = 0

    def __post_init__(self):
        if self.handedness not in ("left", "right"):
            raise ValueError(f"unknown handedness {self.handedness!r}")
        if self.grouping not in ("colour", "shape"):
            raise ValueError(f"unknown grouping mode {self.grouping!r}")
        if not 0.5 <= self.compactness <= 1.5:
            raise ValueError("compactness must lie in [0.5, 1.5]")
        if any(s < 0 for s in self.noise_sigma.values()):
            raise ValueError("noise sigma must be non-negative")


def _abstract_truth(params: SyntheticUserParams, roster: list[str]) -> np.ndarray:
    """Two lines: membership from the grouping mode, in-line order by size."""
    c = params.compactness
    groups: dict[bool, list[str]] = {True: [], False: []}
    for name in roster:
        size, colour, shape = parse_abstract_name(name)
        top = (colour == "red") if params.grouping == "colour" else (shape == "box")
        groups[top].append(name)
    pos = {}
    for top, members in groups.items():
        members.sort(key=lambda n: -parse_abstract_name(n)[0])  # big first
        m = len(members)
        for k, name in enumerate(members):
            x = (k - (m - 1) / 2) * ABSTRACT_SPACING * c
            y = (ABSTRACT_LINE_Y if top else -ABSTRACT_LINE_Y) * c
            pos[name] = (x, y)
    return np.array([pos[n] for n in roster])


def _mirrored_truth(params: SyntheticUserParams, layout: dict[str, tuple[float, float]],
                    roster: list[str], extra: dict[str, tuple[float, float]] | None = None) -> np.ndarray:
    c = params.compactness
    side = 1.0 if params.handedness == "right" else -1.0
    table = dict(layout)
    if extra:
        table.update(extra)
    return np.array([(table[n][0] * side * c, table[n][1] * c) for n in roster])


def ground_truth_arrangement(params: SyntheticUserParams, template: str,
                             roster: list[str] | None = None) -> np.ndarray:
    """Noise-free positions for the template roster under these preferences."""
    if template in ABSTRACT_ROSTERS:
        return _abstract_truth(params, roster or ABSTRACT_ROSTERS[template])
    if template == "dining":
        return _mirrored_truth(params, DINING_LAYOUT, roster or list(DINING_LAYOUT))
    if template == "office":
        names = roster or list(OFFICE_LAYOUT)
        return _mirrored_truth(params, OFFICE_LAYOUT, names,
                               extra={"laptop": OFFICE_LAPTOP_SLOT})
    raise ValueError(f"unknown template {template!r}")


def sample_params(rng: np.random.Generator, mix: dict | None = None,
                  seed: int = 0) -> SyntheticUserParams:
    mix = mix or {}
    compact_range = mix.get("compactness_range", (0.9, 1.1))
    noise = dict(mix.get("noise_sigma", DEFAULT_NOISE))
    return SyntheticUserParams(
        handedness="left" if rng.random() < mix.get("left_fraction", 0.5) else "right",
        grouping="colour" if rng.random() < mix.get("colour_fraction", 0.5) else "shape",
        compactness=float(rng.uniform(*compact_range)),
        noise_sigma=noise,
        seed=seed,
    )


def generate_dataset(n_users: int, rng: np.random.Generator | int,
                     mix: dict | None = None,
                     templates: list[str] | None = None,
                     include_laptop: bool = False,
                     user_prefix: str = "user") -> tuple[Dataset, list[SyntheticUserParams]]:
    """Emit n_users, each arranging every requested template with noise."""
    if n_users < 1:
        raise ValueError("need at least one user")
    if mix is not None and not isinstance(mix, dict):
        raise ValueError("mix must be a mapping of distribution settings")
    rng = np.random.default_rng(rng) if isinstance(rng, int) else rng
    templates = templates or list(TEMPLATES)
    registry = make_registry(include_laptop=include_laptop)
    registry = {t: registry[t] for t in templates}
    users, all_params = [], []
    for i in range(n_users):
        params = sample_params(rng, mix, seed=i)
        scenes = []
        for template in templates:
            spec = registry[template]
            truth = ground_truth_arrangement(params, template, spec.object_names)
            sigma = params.noise_sigma.get(template, 0.0)
            noisy = truth + rng.normal(0, sigma, truth.shape) if sigma > 0 else truth
            objs = [ObjectInstance(name, noisy[k],
                                   features=spec.object_features[k],
                                   onehot_index=None)
                    for k, name in enumerate(spec.object_names)]
            scenes.append(Scene(template, objs))
        users.append(UserRecord(f"{user_prefix}{i:03d}", scenes))
        all_params.append(params)
    return Dataset(users, registry), all_params


# -- label oracles -------------------------------------------------------------


def classify_handedness(scene: Scene) -> str:
    """Dining/office rule: which side of the anchor the handed item sits on."""
    pos = {o.name: o.position for o in scene.objects if o.placed}
    if scene.template == "dining":
        if "fork" not in pos or "plate" not in pos:
            raise ValueError("dining handedness needs fork and plate")
        return "right" if pos["fork"][0] < pos["plate"][0] else "left"
    if scene.template == "office":
        if "mouse" not in pos or "keyboard" not in pos:
            raise ValueError("office handedness needs mouse and keyboard")
        return "right" if pos["mouse"][0] > pos["keyboard"][0] else "left"
    raise ValueError(f"no handedness rule for template {scene.template!r}")


def classify_grouping(scene: Scene) -> str:
    """Abstract rule: which attribute better explains the two lines."""
    if scene.template not in ABSTRACT_ROSTERS:
        raise ValueError(f"no grouping rule for template {scene.template!r}")
    names = scene.names()
    ys = scene.positions()[:, 1]
    top = ys > np.median(ys)  # split into the two lines
    scores = {}
    for mode in ("colour", "shape"):
        agree = 0
        for name, is_top in zip(names, top):
            _, colour, shape = parse_abstract_name(name)
            predicted_top = (colour == "red") if mode == "colour" else (shape == "box")
            agree += int(predicted_top == is_top)
        score = agree / len(names)
        scores[mode] = max(score, 1.0 - score)  # line naming is arbitrary
    return max(scores, key=scores.get)
