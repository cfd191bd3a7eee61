"""Build the bundled 32-d word-embedding table.

Tokens get hand-authored concept vectors (category memberships plus
size/colour/shape attributes) projected through a fixed seeded matrix,
so lexical neighbours ("salt"/"pepper") stay close while unrelated
tokens ("salt"/"monitor") stay far. "laptop" is constructed as a blend
of "computer" and "keyboard" so it sits between them.

Run from the repo root:  python3 scripts/build_embedding_fixture.py
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np

WIDTH = 32
OUT = Path(__file__).resolve().parents[1] / "src" / "tidylearn" / "data" / "embeddings_32d.txt"

CATEGORIES = [
    "tableware", "cutlery", "drinkware", "condiment", "linen",
    "electronics", "computing", "input_device", "display", "stationery",
    "lighting", "furniture", "decor", "kitchen_tool", "bathroom", "abstract",
]
ATTRS = ["size", "red", "green", "blue", "boxy", "round"]
DIM = len(CATEGORIES) + len(ATTRS)


def concept(cats: dict[str, float], attrs: dict[str, float] | None = None) -> np.ndarray:
    v = np.zeros(DIM)
    for name, w in cats.items():
        v[CATEGORIES.index(name)] = w
    for name, w in (attrs or {}).items():
        v[len(CATEGORIES) + ATTRS.index(name)] = w
    return v


TOKENS: dict[str, np.ndarray] = {
    # dining
    "plate": concept({"tableware": 1.0}, {"round": 0.8, "size": 0.5}),
    "bowl": concept({"tableware": 1.0}, {"round": 0.9, "size": 0.4}),
    "saucer": concept({"tableware": 0.9, "drinkware": 0.3}, {"round": 0.8, "size": 0.3}),
    "tray": concept({"tableware": 0.7, "kitchen_tool": 0.3}, {"size": 0.6}),
    "cup": concept({"drinkware": 1.0}, {"round": 0.7, "size": 0.3}),
    "glass": concept({"drinkware": 1.0}, {"round": 0.6, "size": 0.3}),
    "mug": concept({"drinkware": 1.0}, {"round": 0.7, "size": 0.3}),
    "teapot": concept({"drinkware": 0.7, "kitchen_tool": 0.4}, {"round": 0.7, "size": 0.5}),
    "jug": concept({"drinkware": 0.8, "kitchen_tool": 0.3}, {"size": 0.5}),
    "fork": concept({"cutlery": 1.0}, {"size": 0.25}),
    "knife": concept({"cutlery": 1.0}, {"size": 0.25}),
    "spoon": concept({"cutlery": 1.0}, {"size": 0.25, "round": 0.2}),
    "teaspoon": concept({"cutlery": 0.95}, {"size": 0.15, "round": 0.2}),
    "napkin": concept({"linen": 1.0, "tableware": 0.2}, {"boxy": 0.4, "size": 0.3}),
    "salt": concept({"condiment": 1.0, "kitchen_tool": 0.2}, {"size": 0.12}),
    "pepper": concept({"condiment": 1.0, "kitchen_tool": 0.2}, {"size": 0.12}),
    # office
    "monitor": concept({"electronics": 0.9, "display": 1.0, "computing": 0.5}, {"boxy": 0.7, "size": 0.7}),
    "keyboard": concept({"electronics": 0.8, "input_device": 1.0, "computing": 0.6}, {"boxy": 0.8, "size": 0.5}),
    "mouse": concept({"electronics": 0.7, "input_device": 1.0, "computing": 0.5}, {"round": 0.5, "size": 0.15}),
    "computer": concept({"electronics": 1.0, "computing": 1.0}, {"boxy": 0.8, "size": 0.7}),
    "tablet": concept({"electronics": 0.9, "computing": 0.8, "display": 0.7}, {"boxy": 0.7, "size": 0.4}),
    "phone": concept({"electronics": 0.9, "computing": 0.5, "display": 0.5}, {"boxy": 0.6, "size": 0.2}),
    "charger": concept({"electronics": 0.8}, {"size": 0.15}),
    "headphones": concept({"electronics": 0.8}, {"round": 0.5, "size": 0.3}),
    "lamp": concept({"lighting": 1.0, "decor": 0.3, "electronics": 0.3}, {"size": 0.5}),
    "candle": concept({"lighting": 0.8, "decor": 0.5}, {"size": 0.2, "round": 0.4}),
    "notepad": concept({"stationery": 1.0}, {"boxy": 0.8, "size": 0.3}),
    "notebook": concept({"stationery": 1.0}, {"boxy": 0.8, "size": 0.35}),
    "book": concept({"stationery": 0.7, "decor": 0.2}, {"boxy": 0.8, "size": 0.4}),
    "folder": concept({"stationery": 0.9}, {"boxy": 0.9, "size": 0.4}),
    "pencil": concept({"stationery": 1.0}, {"size": 0.15}),
    "pen": concept({"stationery": 1.0}, {"size": 0.15}),
    "eraser": concept({"stationery": 0.9}, {"size": 0.1, "boxy": 0.5}),
    "stapler": concept({"stationery": 0.8}, {"size": 0.2, "boxy": 0.5}),
    "scissors": concept({"stationery": 0.7, "kitchen_tool": 0.2}, {"size": 0.2}),
    # household
    "chair": concept({"furniture": 1.0}, {"size": 0.8}),
    "table": concept({"furniture": 1.0}, {"size": 0.9, "boxy": 0.5}),
    "shelf": concept({"furniture": 0.9}, {"size": 0.8, "boxy": 0.8}),
    "sofa": concept({"furniture": 1.0}, {"size": 1.0}),
    "cushion": concept({"furniture": 0.4, "linen": 0.6, "decor": 0.3}, {"size": 0.4, "boxy": 0.4}),
    "plant": concept({"decor": 1.0}, {"size": 0.5}),
    "vase": concept({"decor": 0.9}, {"size": 0.35, "round": 0.6}),
    "clock": concept({"decor": 0.7, "electronics": 0.2}, {"round": 0.7, "size": 0.3}),
    "picture": concept({"decor": 0.9}, {"boxy": 0.8, "size": 0.4}),
    "towel": concept({"linen": 0.9, "bathroom": 0.6}, {"size": 0.4}),
    "soap": concept({"bathroom": 1.0}, {"size": 0.12, "round": 0.3}),
    "toothbrush": concept({"bathroom": 1.0}, {"size": 0.15}),
    "kettle": concept({"kitchen_tool": 1.0, "drinkware": 0.3}, {"size": 0.4, "round": 0.5}),
    "pan": concept({"kitchen_tool": 1.0}, {"size": 0.5, "round": 0.6}),
    "pot": concept({"kitchen_tool": 1.0}, {"size": 0.5, "round": 0.6}),
    "basket": concept({"kitchen_tool": 0.4, "decor": 0.4}, {"size": 0.5, "round": 0.4}),
}

ABSTRACT_SIZES = {"tiny": 0.03, "small": 0.04, "medium": 0.06, "big": 0.09, "huge": 0.11}

for size_name, size in ABSTRACT_SIZES.items():
    for colour in ("red", "blue"):
        for shape in ("box", "ball"):
            token = f"{size_name}_{colour}_{shape}"
            TOKENS[token] = concept(
                {"abstract": 1.0},
                {"size": size * 6, colour: 1.0,
                 "boxy" if shape == "box" else "round": 1.0})

# keep only the abstract tokens the scene rosters use, to stay near 64 tokens
ABSTRACT_KEEP = {
    "big_red_ball", "small_red_ball", "huge_blue_box",
    "small_blue_box", "medium_red_box", "medium_blue_ball",
    "medium_red_ball", "tiny_red_ball", "big_blue_box",
    "medium_blue_box", "big_red_box", "tiny_blue_ball",
}
TOKENS = {t: v for t, v in TOKENS.items()
          if not t.split("_")[0] in ABSTRACT_SIZES or t in ABSTRACT_KEEP}


def build() -> dict[str, np.ndarray]:
    rng = np.random.default_rng(20240817)
    projection = rng.normal(0, 1.0 / np.sqrt(DIM), size=(WIDTH, DIM))
    table: dict[str, np.ndarray] = {}
    for token, cvec in TOKENS.items():
        noise = np.random.default_rng(zlib.crc32(token.encode())).normal(0, 0.02, WIDTH)
        table[token] = projection @ cvec + noise
    # laptop: unseen-object probe, a blend of computer and keyboard so its
    # Euclidean nearest neighbour is the computer while cosine keeps it
    # between the two
    blend = 0.55 * table["computer"] + 0.45 * table["keyboard"]
    table["laptop"] = blend + np.random.default_rng(1337).normal(0, 0.005, WIDTH)
    return table


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def verify(table: dict[str, np.ndarray]) -> None:
    assert cosine(table["salt"], table["pepper"]) > cosine(table["salt"], table["monitor"])
    ck = cosine(table["computer"], table["keyboard"])
    assert cosine(table["laptop"], table["computer"]) > ck
    assert cosine(table["laptop"], table["keyboard"]) > ck
    office = ["monitor", "keyboard", "mouse", "computer", "lamp", "notepad", "pencil", "mug"]
    dists = {t: np.linalg.norm(table["laptop"] - table[t]) for t in office}
    assert min(dists, key=dists.get) == "computer", dists
    print("fixture properties verified")


def main() -> None:
    table = build()
    verify(table)
    lines = [str(WIDTH)]
    for token in sorted(table):
        vec = " ".join(f"{v:.6f}" for v in table[token])
        lines.append(f"{token} {vec}")
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(table)} tokens x {WIDTH} dims to {OUT}")


if __name__ == "__main__":
    main()
