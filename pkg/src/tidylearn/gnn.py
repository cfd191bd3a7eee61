"""Graph building blocks: single-head graph attention, dense stacks, pooling.

A graph is a node-feature matrix plus directed edges (src, dst), where an
edge contributes the source node's features to the destination node's
update. Scene graphs are fully connected with self-loops, so every node
always has at least one in-neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, gather_rows, segment_sum

LEAKY_SLOPE = 0.2


def init_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """Uniform ±1/sqrt(fan_in) initialisation."""
    bound = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


@dataclass
class GatParams:
    """One graph-attention layer: shared linear map W and attention vector a."""

    weight: Tensor            # (out_dim, in_dim)
    attention: Tensor         # (2 * out_dim,)
    negative_slope: float = LEAKY_SLOPE

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def __post_init__(self):
        if self.attention.shape != (2 * self.out_dim,):
            raise ValueError(
                f"attention vector must have length {2 * self.out_dim}, "
                f"got {self.attention.shape}")

    @staticmethod
    def create(rng: np.random.Generator, in_dim: int, out_dim: int,
               negative_slope: float = LEAKY_SLOPE) -> "GatParams":
        w = Tensor(init_uniform(rng, out_dim, in_dim), requires_grad=True)
        a = Tensor(rng.uniform(-1, 1, size=2 * out_dim) / np.sqrt(2 * out_dim),
                   requires_grad=True)
        return GatParams(w, a, negative_slope)

    def tensors(self) -> list[Tensor]:
        return [self.weight, self.attention]


@dataclass
class DenseParams:
    """Stack of affine layers with an activation between (not after) layers."""

    layers: list[tuple[Tensor, Tensor]]   # [(weight (out,in), bias (out,)), ...]
    activation: str = "leaky_relu"        # leaky_relu | elu | linear
    negative_slope: float = LEAKY_SLOPE

    def __post_init__(self):
        for (w1, _), (w2, _) in zip(self.layers, self.layers[1:]):
            if w2.shape[1] != w1.shape[0]:
                raise ValueError(
                    f"layer dimensions do not chain: {w1.shape} -> {w2.shape}")

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @staticmethod
    def create(rng: np.random.Generator, dims: list[int],
               activation: str = "leaky_relu") -> "DenseParams":
        layers = []
        for d_in, d_out in zip(dims, dims[1:]):
            w = Tensor(init_uniform(rng, d_out, d_in), requires_grad=True)
            b = Tensor(np.zeros(d_out), requires_grad=True)
            layers.append((w, b))
        return DenseParams(layers, activation)

    def tensors(self) -> list[Tensor]:
        out = []
        for w, b in self.layers:
            out.extend([w, b])
        return out


def _activate(x: Tensor, kind: str, slope: float) -> Tensor:
    if kind == "leaky_relu":
        return x.leaky_relu(slope)
    if kind == "elu":
        return x.elu()
    if kind == "linear":
        return x
    raise ValueError(f"unknown activation {kind!r}")


def dense_forward(x: Tensor, params: DenseParams) -> Tensor:
    if x.shape[-1] != params.in_dim:
        raise ValueError(
            f"input dim {x.shape[-1]} does not match first layer {params.in_dim}")
    h = x
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        h = h @ _transpose(w) + b
        if i != last:
            h = _activate(h, params.activation, params.negative_slope)
    return h


def _transpose(t: Tensor) -> Tensor:
    data = t.data.T

    def grad_fn(g):
        return (g.T,)

    return Tensor._from_op(data, (t,), grad_fn)


def _segment_max_const(values: np.ndarray, ids: np.ndarray, num: int) -> np.ndarray:
    out = np.full(num, -np.inf)
    np.maximum.at(out, ids, values)
    return out


def gat_forward(x: Tensor, edges: tuple[np.ndarray, np.ndarray],
                params: GatParams) -> tuple[Tensor, Tensor]:
    """Attention-weighted neighbourhood sum.

    edges = (src, dst): node dst attends over its in-neighbours src.
    Returns the updated node features (N, out_dim) and the per-edge
    attention weights; weights into each dst node sum to 1.
    """
    src, dst = (np.asarray(e, dtype=np.int64) for e in edges)
    n = x.shape[0]
    if x.shape[-1] != params.in_dim:
        raise ValueError(
            f"node feature dim {x.shape[-1]} does not match layer {params.in_dim}")
    if len(src) != len(dst):
        raise ValueError("edge arrays must have equal length")
    if len(dst) == 0 or np.bincount(dst, minlength=n).min() == 0:
        raise ValueError("every node needs at least one in-edge (add self-loops)")

    wx = x @ _transpose(params.weight)                       # (N, out)
    d = params.out_dim
    a_dst = params.attention[:d].reshape(d, 1)
    a_src = params.attention[d:].reshape(d, 1)
    score_dst = (wx @ a_dst).reshape(-1)                     # (N,)
    score_src = (wx @ a_src).reshape(-1)
    e = (gather_rows(score_dst, dst) + gather_rows(score_src, src)) \
        .leaky_relu(params.negative_slope)                   # (E,)

    # per-destination softmax; the max shift is a constant so gradients
    # are unaffected
    shift = _segment_max_const(e.data, dst, n)
    ez = (e - Tensor(shift[dst])).exp()
    denom = segment_sum(ez.reshape(-1, 1), dst, n)           # (N, 1)
    alpha = ez / gather_rows(denom, dst).reshape(-1)         # (E,)

    msgs = gather_rows(wx, src) * alpha.reshape(-1, 1)
    h = segment_sum(msgs, dst, n)
    return h, alpha


def global_add_pool(x: Tensor, membership: np.ndarray, num_graphs: int) -> Tensor:
    """Sum node features per graph. Every graph must own at least one node."""
    ids = np.asarray(membership, dtype=np.int64)
    counts = np.bincount(ids, minlength=num_graphs)
    if (counts == 0).any():
        raise ValueError("global_add_pool: a graph has no nodes")
    return segment_sum(x, ids, num_graphs)


def full_edges(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All ordered pairs including self-loops for an n-node scene graph."""
    idx = np.arange(n, dtype=np.int64)
    src = np.repeat(idx, n)
    dst = np.tile(idx, n)
    return src, dst
