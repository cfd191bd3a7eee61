"""Probabilistic pose-graph tidiness baseline.

Learns a Gaussian-mixture distribution over the displacement between
every ordered object pair from example scenes, scores arrangements by
summed negative log-likelihood over all pairs, and optimises by growing
a candidate population along a BIC-prioritised spanning tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenes import DataError, Scene

COV_FLOOR = 1e-6          # eigenvalue floor for mixture covariances
DENSITY_FLOOR = 1e-12     # keeps -log densities finite for outliers
EM_TOL = 1e-7
EM_MAX_ITER = 200
DEFAULT_POP = 1000
K_RANGE = (1, 2, 3)


def _floor_cov(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    vals = np.maximum(vals, COV_FLOOR)
    return (vecs * vals) @ vecs.T


@dataclass
class Gmm:
    weights: np.ndarray       # (K,)
    means: np.ndarray         # (K, D)
    covariances: np.ndarray   # (K, D, D)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        if (self.weights < 0).any() or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        for cov in self.covariances:
            if np.linalg.eigvalsh((cov + cov.T) / 2).min() < COV_FLOOR - 1e-12:
                raise ValueError("covariance eigenvalue below the variance floor")

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def negated(self) -> "Gmm":
        """Distribution of -X: mirrored means, identical covariances."""
        return Gmm(self.weights.copy(), -self.means, self.covariances.copy())

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        parts = np.empty((len(x), self.k))
        for k in range(self.k):
            diff = x - self.means[k]
            chol = np.linalg.cholesky(self.covariances[k])
            sol = np.linalg.solve(chol, diff.T)
            maha = (sol ** 2).sum(axis=0)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            parts[:, k] = (np.log(self.weights[k] + 1e-300)
                           - 0.5 * (maha + logdet + self.dim * np.log(2 * np.pi)))
        m = parts.max(axis=1, keepdims=True)
        return (m + np.log(np.exp(parts - m).sum(axis=1, keepdims=True))).reshape(-1)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comps = rng.choice(self.k, size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for k in range(self.k):
            mask = comps == k
            if mask.any():
                chol = np.linalg.cholesky(self.covariances[k])
                z = rng.standard_normal((int(mask.sum()), self.dim))
                out[mask] = self.means[k] + z @ chol.T
        return out


# -- EM fitting ----------------------------------------------------------------


def _kmeanspp_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min([((points - c) ** 2).sum(axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            centers.append(points[rng.integers(n)])
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    return np.stack(centers)


def em_fit(points: np.ndarray, k: int,
           rng: np.random.Generator) -> tuple[Gmm, float, list[float]]:
    """EM with k-means++ seeding; returns the fit, final and per-iteration LL."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be (N, D)")
    n, d = points.shape
    if k > n:
        raise ValueError(f"cannot fit {k} components to {n} points")
    means = _kmeanspp_seeds(points, k, rng)
    base_cov = _floor_cov(np.cov(points.T) if n > 1 else np.eye(d) * COV_FLOOR)
    covs = np.stack([base_cov.copy() for _ in range(k)])
    weights = np.full(k, 1.0 / k)
    gmm = Gmm(weights, means, covs)
    history: list[float] = []
    best = (gmm, -np.inf)
    for _ in range(EM_MAX_ITER):
        # E-step in log space
        parts = np.empty((n, k))
        for j in range(k):
            single = Gmm(np.array([1.0]), gmm.means[j:j + 1], gmm.covariances[j:j + 1])
            parts[:, j] = np.log(gmm.weights[j] + 1e-300) + single.log_pdf(points)
        m = parts.max(axis=1, keepdims=True)
        log_norm = m + np.log(np.exp(parts - m).sum(axis=1, keepdims=True))
        ll = float(log_norm.sum())
        if history and ll < history[-1] - 1e-12:
            break  # flooring can end the ascent; keep the best params
        history.append(ll)
        best = (gmm, ll)
        if len(history) > 1:
            prev = history[-2]
            if abs(ll - prev) <= EM_TOL * max(1.0, abs(prev)):
                break
        resp = np.exp(parts - log_norm)
        # M-step
        nk = resp.sum(axis=0)
        weights = nk / n
        means = (resp.T @ points) / nk[:, None]
        covs = np.empty((k, d, d))
        for j in range(k):
            diff = points - means[j]
            covs[j] = _floor_cov((resp[:, j, None] * diff).T @ diff / nk[j])
        gmm = Gmm(weights / weights.sum(), means, covs)
    return best[0], best[1], history


def bic(gmm: Gmm, points: np.ndarray) -> float:
    """m ln N - 2 ln L with m = (K-1) + K D + K D(D+1)/2 free parameters."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 0:
        raise ValueError("BIC needs at least one point")
    n, d = points.shape
    k = gmm.k
    m = (k - 1) + k * d + k * d * (d + 1) // 2
    ll = float(gmm.log_pdf(points).sum())
    return m * np.log(n) - 2.0 * ll


def fit_best_gmm(points: np.ndarray, rng: np.random.Generator,
                 k_range=K_RANGE) -> tuple[Gmm, float]:
    """Lowest-BIC mixture over the candidate component counts."""
    best_gmm, best_bic = None, np.inf
    for k in k_range:
        if k > len(points):
            continue
        gmm, _, _ = em_fit(points, k, rng)
        score = bic(gmm, points)
        if score < best_bic:
            best_gmm, best_bic = gmm, score
    if best_gmm is None:
        raise DataError("not enough displacement samples to fit any mixture")
    return best_gmm, best_bic


# -- the pose graph ---------------------------------------------------------------


@dataclass
class PoseGraphModel:
    names: list[str]
    edges: dict[tuple[int, int], Gmm]     # ordered pairs (i, j), i != j
    edge_bic: dict[tuple[int, int], float]
    object_means: np.ndarray              # (n, D) training-mean positions

    @property
    def size(self) -> int:
        return len(self.names)

    def edge(self, i: int, j: int) -> Gmm:
        return self.edges[(i, j)]


def fit_pose_graph(scenes: list[Scene], rng: np.random.Generator | int = 0,
                   k_range=K_RANGE) -> PoseGraphModel:
    """Fit displacement mixtures for every ordered object pair."""
    if len(scenes) < 2:
        raise DataError("pose graph needs at least two example scenes")
    roster = scenes[0].names()
    for scene in scenes[1:]:
        if scene.names() != roster:
            raise DataError("all scenes must share one object roster")
    rng = np.random.default_rng(rng) if isinstance(rng, int) else rng
    stacks = np.stack([s.positions() for s in scenes])      # (S, n, D)
    n = len(roster)
    edges: dict[tuple[int, int], Gmm] = {}
    bics: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            disp = stacks[:, j, :] - stacks[:, i, :]
            gmm, score = fit_best_gmm(disp, rng, k_range)
            edges[(i, j)] = gmm
            edges[(j, i)] = gmm.negated()        # z_ji = -z_ij by construction
            bics[(i, j)] = bics[(j, i)] = score
    return PoseGraphModel(names=roster, edges=edges, edge_bic=bics,
                          object_means=stacks.mean(axis=0))


def edge_cost(gmm: Gmm, displacement: np.ndarray) -> float:
    """Negative log-likelihood of one pairwise displacement."""
    density = float(gmm.pdf(np.atleast_2d(displacement))[0])
    return -float(np.log(max(density, DENSITY_FLOOR)))


def global_cost(arrangement: np.ndarray, model: PoseGraphModel) -> float:
    """Sum of edge costs over unordered pairs."""
    arrangement = np.asarray(arrangement, dtype=np.float64)
    if arrangement.shape[0] != model.size:
        raise ValueError("arrangement must place every object")
    total = 0.0
    for i in range(model.size):
        for j in range(i + 1, model.size):
            total += edge_cost(model.edge(i, j), arrangement[j] - arrangement[i])
    return total


# -- spanning tree ------------------------------------------------------------------


@dataclass
class SpanningTree:
    root: int
    edges: list[tuple[int, int]]   # (parent, child) in placement order

    def __post_init__(self):
        n = len(self.edges) + 1
        seen = {self.root}
        for parent, child in self.edges:
            if parent not in seen or child in seen:
                raise ValueError("edges must expand the tree from placed nodes")
            seen.add(child)
        if len(seen) != n:
            raise ValueError("tree must reach every object exactly once")


def select_tree(model: PoseGraphModel) -> SpanningTree:
    """Minimum spanning tree under BIC weights, rooted at the best-connected node."""
    n = model.size
    if n == 1:
        return SpanningTree(root=0, edges=[])
    pairs = sorted(((model.edge_bic[(i, j)], i, j)
                    for i in range(n) for j in range(i + 1, n)))
    parent_of = list(range(n))

    def find(a):
        while parent_of[a] != a:
            parent_of[a] = parent_of[parent_of[a]]
            a = parent_of[a]
        return a

    chosen = []
    for score, i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent_of[ri] = rj
            chosen.append((i, j))
            if len(chosen) == n - 1:
                break
    incident = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if i != j:
                incident[i] += model.edge_bic[(min(i, j), max(i, j))]
    root = int(np.argmin(incident))
    # breadth-first order from the root, tighter edges first
    adj: dict[int, list[tuple[float, int]]] = {i: [] for i in range(n)}
    for i, j in chosen:
        w = model.edge_bic[(i, j)]
        adj[i].append((w, j))
        adj[j].append((w, i))
    ordered, seen, frontier = [], {root}, [root]
    while frontier:
        node = frontier.pop(0)
        for _, nxt in sorted(adj[node]):
            if nxt not in seen:
                seen.add(nxt)
                ordered.append((node, nxt))
                frontier.append(nxt)
    return SpanningTree(root=root, edges=ordered)


# -- sampling & scoring ---------------------------------------------------------------


@dataclass
class CandidateSet:
    arrangements: np.ndarray   # (pop, n, D), best first
    scores: np.ndarray         # (pop,), normalised to sum 1

    def best(self) -> np.ndarray:
        return self.arrangements[0]


def _log_likelihoods(model: PoseGraphModel, positions: np.ndarray,
                     placed: list[int]) -> np.ndarray:
    """Total pairwise log-density over placed objects, per candidate."""
    pop = positions.shape[0]
    total = np.zeros(pop)
    for a_idx in range(len(placed)):
        for b_idx in range(a_idx + 1, len(placed)):
            i, j = placed[a_idx], placed[b_idx]
            disp = positions[:, j, :] - positions[:, i, :]
            logp = model.edge(i, j).log_pdf(disp)
            total += np.maximum(logp, np.log(DENSITY_FLOOR))
    return total


def _systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    pop = len(weights)
    positions = (rng.uniform() + np.arange(pop)) / pop
    return np.searchsorted(np.cumsum(weights), positions)


def sample_and_score(model: PoseGraphModel, tree: SpanningTree,
                     pop_size: int = DEFAULT_POP,
                     rng: np.random.Generator | int = 0,
                     resample: bool = True) -> CandidateSet:
    """Grow pop_size candidate arrangements edge by edge, re-scoring each step."""
    if pop_size < 1:
        raise ValueError("population size must be at least 1")
    rng = np.random.default_rng(rng) if isinstance(rng, int) else rng
    n, d = model.size, model.object_means.shape[1]
    positions = np.zeros((pop_size, n, d))
    scores = np.full(pop_size, 1.0 / pop_size)
    placed = [tree.root]
    for step, (parent, child) in enumerate(tree.edges):
        disp = model.edge(parent, child).sample(pop_size, rng)
        positions[:, child, :] = positions[:, parent, :] + disp
        placed.append(child)
        ll = _log_likelihoods(model, positions, placed)
        likelihood = np.exp(ll - ll.max())     # shift-invariant under normalisation
        scores = 1.0 / pop_size + likelihood
        scores = scores / scores.sum()
        is_last = step == len(tree.edges) - 1
        if resample and not is_last:
            ess = 1.0 / float((scores ** 2).sum())
            if ess < pop_size / 2:
                idx = _systematic_resample(scores, rng)
                positions = positions[idx]
                scores = np.full(pop_size, 1.0 / pop_size)
    order = np.argsort(-scores)
    return CandidateSet(arrangements=positions[order], scores=scores[order])


def tidy(model: PoseGraphModel, tree: SpanningTree | None = None,
         pop_size: int = DEFAULT_POP,
         rng: np.random.Generator | int = 0) -> np.ndarray:
    """Best-scoring arrangement, anchored at the root's training-mean position."""
    tree = tree or select_tree(model)
    candidates = sample_and_score(model, tree, pop_size, rng)
    best = candidates.best().copy()
    best += model.object_means[tree.root] - best[tree.root]
    return best


# -- export ------------------------------------------------------------------------


def pose_graph_to_json(model: PoseGraphModel, tree: SpanningTree | None = None) -> dict:
    edges = []
    for (i, j), gmm in sorted(model.edges.items()):
        if i < j:
            edges.append({
                "from": model.names[i], "to": model.names[j],
                "weights": gmm.weights.tolist(),
                "means": gmm.means.tolist(),
                "covariances": gmm.covariances.tolist(),
                "bic": model.edge_bic[(i, j)],
            })
    payload = {
        "schema_version": 1,
        "kind": "pose-graph",
        "objects": list(model.names),
        "object_means": model.object_means.tolist(),
        "edges": edges,
    }
    if tree is not None:
        payload["tree"] = {"root": model.names[tree.root],
                           "edges": [[model.names[a], model.names[b]]
                                     for a, b in tree.edges]}
    return payload


def save_pose_graph(model: PoseGraphModel, path: str | Path,
                    tree: SpanningTree | None = None) -> None:
    Path(path).write_text(json.dumps(pose_graph_to_json(model, tree), sort_keys=True))
