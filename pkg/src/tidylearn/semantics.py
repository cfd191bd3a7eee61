"""Object identity encodings: one-hot, hand features, and word embeddings.

The word route looks a token up in a plain-text embedding table and maps
it through a small trainable extractor so the arrangement model can pull
out whatever lexical structure matters for placement. A ~60-token table
covering household/office/dining vocabulary ships with the package;
larger tables in the same format drop in via `load_table`.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .gnn import DenseParams, dense_forward

DEFAULT_SEMANTIC_DIM = 8


class OovError(KeyError):
    """Token missing from the embedding table; no silent fallback."""


class TableFormatError(ValueError):
    """Embedding file is ragged, duplicated, or empty."""


def normalize_token(name: str) -> str:
    return "_".join(name.lower().split())


@dataclass
class EmbeddingTable:
    vocab: dict[str, int]
    vectors: np.ndarray       # (len(vocab), width)
    source: str = "bundled"

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, name: str) -> bool:
        return normalize_token(name) in self.vocab

    def lookup(self, name: str) -> np.ndarray:
        token = normalize_token(name)
        idx = self.vocab.get(token)
        if idx is None:
            raise OovError(f"token {token!r} not in embedding table ({self.source})")
        return self.vectors[idx]

    def cosine(self, a: str, b: str) -> float:
        va, vb = self.lookup(a), self.lookup(b)
        return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))


def load_table(path: str | Path, source: str | None = None) -> EmbeddingTable:
    """Parse `token v1 ... vK` lines; an optional first line declares K."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise TableFormatError(f"embedding file {path} is empty")
    width = None
    start = 0
    first = lines[0].split()
    if len(first) == 1:
        width = int(first[0])
        start = 1
        if len(lines) == 1:
            raise TableFormatError(f"embedding file {path} has a header but no rows")
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        parts = line.split()
        token, values = parts[0], parts[1:]
        if width is None:
            width = len(values)
        if len(values) != width:
            raise TableFormatError(
                f"{path}:{lineno}: expected {width} values for {token!r}, got {len(values)}")
        if token in vocab:
            raise TableFormatError(f"{path}:{lineno}: duplicate token {token!r}")
        try:
            row = np.array([float(v) for v in values])
        except ValueError as exc:
            raise TableFormatError(f"{path}:{lineno}: non-numeric entry") from exc
        if not np.isfinite(row).all():
            raise TableFormatError(f"{path}:{lineno}: non-finite entry")
        vocab[token] = len(rows)
        rows.append(row)
    return EmbeddingTable(vocab=vocab, vectors=np.stack(rows),
                          source=source or str(path))


def bundled_table_path() -> Path:
    return Path(resources.files("tidylearn").joinpath("data/embeddings_32d.txt"))


def load_bundled_table() -> EmbeddingTable:
    return load_table(bundled_table_path(), source="bundled")


# -- encodings ---------------------------------------------------------------


def one_hot(index: int, size: int) -> np.ndarray:
    if not 0 <= index < size:
        raise ValueError(f"one-hot index {index} out of range for size {size}")
    v = np.zeros(size)
    v[index] = 1.0
    return v


def feature_vector(size: float, rgb: tuple[float, float, float],
                   shape_code: float) -> np.ndarray:
    """Abstract-object identity: physical size, RGB colour, shape code."""
    return np.array([size, *rgb, shape_code], dtype=np.float64)


FEATURE_DIM = 5


def make_extractor(rng: np.random.Generator, word_width: int,
                   out_dim: int = DEFAULT_SEMANTIC_DIM,
                   hidden: int = 16) -> DenseParams:
    """Trainable word-vector -> semantic-embedding head (trained end to end)."""
    return DenseParams.create(rng, [word_width, hidden, out_dim])


def extract_semantic(wordvecs: Tensor | np.ndarray, extractor: DenseParams) -> Tensor:
    x = wordvecs if isinstance(wordvecs, Tensor) else Tensor(wordvecs)
    if x.shape[-1] != extractor.in_dim:
        raise ValueError(
            f"word vector width {x.shape[-1]} does not match extractor "
            f"input {extractor.in_dim}")
    return dense_forward(x, extractor)
