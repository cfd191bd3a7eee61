"""Preference VAE: graph-attention encoder, position-predictor decoder,
training loop, and the arrangement inference tasks.

The encoder consumes each scene as a graph of semantic+position node
features, pools per scene, averages across a user's scenes, and emits a
Gaussian posterior over the user preference vector. The decoder takes
semantics concatenated with the preference vector and predicts one
position per node. Both train jointly against squared reconstruction
error plus a beta-weighted KL prior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .autodiff import PlateauScheduler, SgdMomentum, Tensor, concat, gather_rows, segment_sum
from .gnn import DenseParams, GatParams, dense_forward, gat_forward, full_edges
from .scenes import (
    DataError,
    Dataset,
    NormalizationStats,
    Scene,
    TemplateSpec,
    fit_normalizer,
)
from .semantics import (
    FEATURE_DIM,
    EmbeddingTable,
    extract_semantic,
    make_extractor,
)

LOGVAR_FLOOR = float(np.log(1e-8))
LOGVAR_CEIL = 10.0


class ModelMismatchError(ValueError):
    """Input refers to templates/objects the trained model does not know."""


@dataclass
class TrainConfig:
    """Hyperparameters; defaults follow the abstract-scene profile."""

    epochs: int = 2000
    lr: float = 0.10
    batch_users: int = 4
    beta: float = 0.08
    d_u: int = 2
    graph_dim: int = 20
    enc_hidden: int = 24
    dec_hidden: int = 32
    enc_gat_layers: int = 1
    dec_gat_layers: int = 1
    pos_dim: int = 2
    semantic_mode: str = "onehot"       # onehot | features | word
    semantic_dim: int = 8               # extractor output width (word mode)
    extractor_hidden: int = 16
    noise_sigma: dict[str, float] = field(default_factory=dict)
    node_mask_rate: float = 0.0
    scene_mask_rate: float = 0.0
    momentum: float = 0.9
    clip_norm: float | None = 0.5
    logvar_init: float = -4.0   # initial posterior log-variance bias
    beta_warmup_epochs: int = 0  # linear KL ramp-in; 0 disables
    scheduler_factor: float = 0.5
    scheduler_patience: int = 100
    scheduler_cooldown: int = 80
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.batch_users < 1:
            raise ValueError("batch size must be at least 1")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.semantic_mode not in ("onehot", "features", "word"):
            raise ValueError(f"unknown semantic mode {self.semantic_mode!r}")

    @staticmethod
    def abstract_profile(**overrides) -> "TrainConfig":
        return replace(TrainConfig(), **overrides)

    @staticmethod
    def real_profile(**overrides) -> "TrainConfig":
        cfg = TrainConfig(lr=0.08, beta=0.01, graph_dim=24,
                          noise_sigma={"dining": 0.02, "office": 0.05})
        return replace(cfg, **overrides)

    def masking_variant(self, **overrides) -> "TrainConfig":
        """Node/scene-masking tasks run hotter to escape local optima."""
        merged = {"lr": 0.12, "batch_users": 6}
        merged.update(overrides)
        return replace(self, **merged)


@dataclass
class UserPosterior:
    """Gaussian posterior over one user's preference vector."""

    mu: Tensor
    logvar: Tensor

    def __post_init__(self):
        if not np.isfinite(self.logvar.data).all():
            raise ValueError("posterior log-variance must be finite")

    def mean(self) -> np.ndarray:
        return self.mu.data.reshape(-1).copy()

    def variance(self) -> np.ndarray:
        return np.exp(self.logvar.data.reshape(-1))


def reparameterize(post: UserPosterior, rng: np.random.Generator) -> Tensor:
    eps = rng.standard_normal(post.mu.data.shape)
    return post.mu + (post.logvar * 0.5).exp() * eps


def infer_mean(post: UserPosterior) -> np.ndarray:
    return post.mean()


# -- semantics resolution ------------------------------------------------------


@dataclass
class SemanticCodec:
    """Maps object identities to the node semantic vectors a model trains on."""

    mode: str
    vocab: dict[str, int] | None = None
    table: EmbeddingTable | None = None
    extractor: DenseParams | None = None
    registry_features: dict[str, np.ndarray] | None = None

    @property
    def input_dim(self) -> int:
        if self.mode == "onehot":
            return len(self.vocab)
        if self.mode == "features":
            return FEATURE_DIM
        return self.table.width

    @property
    def output_dim(self) -> int:
        if self.mode == "word":
            return self.extractor.out_dim
        return self.input_dim

    def base_rows(self, names: list[str], features: list | None = None) -> np.ndarray:
        """Constant per-object rows fed into the (optional) extractor."""
        if self.mode == "onehot":
            rows = np.zeros((len(names), len(self.vocab)))
            for i, name in enumerate(names):
                idx = self.vocab.get(name)
                if idx is None:
                    raise ModelMismatchError(
                        f"object {name!r} unknown to this one-hot model")
                rows[i, idx] = 1.0
            return rows
        if self.mode == "features":
            rows = []
            for i, name in enumerate(names):
                feat = features[i] if features is not None else None
                if feat is None:
                    feat = self.registry_features.get(name)
                if feat is None:
                    raise ModelMismatchError(
                        f"object {name!r} has no feature vector for this model")
                rows.append(np.asarray(feat, dtype=np.float64))
            return np.stack(rows)
        return np.stack([self.table.lookup(n) for n in names])

    def embed(self, base_rows: np.ndarray) -> Tensor:
        """Trainable part: identity for fixed encodings, extractor for words."""
        if self.mode == "word":
            return extract_semantic(base_rows, self.extractor)
        return Tensor(base_rows)

    def trainables(self) -> list[Tensor]:
        return self.extractor.tensors() if self.mode == "word" else []


# -- parameter bundles ---------------------------------------------------------


@dataclass
class EncoderParams:
    gat_layers: list[GatParams]
    node_head: DenseParams     # per-node map to the graph-encoding dim
    user_head: DenseParams     # pooled encoding -> (mu, logvar)

    def tensors(self) -> list[Tensor]:
        out = []
        for g in self.gat_layers:
            out.extend(g.tensors())
        return out + self.node_head.tensors() + self.user_head.tensors()


@dataclass
class DecoderParams:
    gat_layers: list[GatParams]
    pos_head: DenseParams      # per-node map to a position

    def tensors(self) -> list[Tensor]:
        out = []
        for g in self.gat_layers:
            out.extend(g.tensors())
        return out + self.pos_head.tensors()


def init_encoder(rng: np.random.Generator, cfg: TrainConfig, sem_dim: int) -> EncoderParams:
    in_dim = sem_dim + cfg.pos_dim
    gats, d = [], in_dim
    for _ in range(cfg.enc_gat_layers):
        gats.append(GatParams.create(rng, d, cfg.enc_hidden))
        d = cfg.enc_hidden
    node_head = DenseParams.create(rng, [cfg.enc_hidden, cfg.graph_dim])
    user_head = DenseParams.create(rng, [cfg.graph_dim, cfg.graph_dim, 2 * cfg.d_u])
    # start posterior variance small so early samples track the mean and the
    # decoder has a usable preference signal from the first epochs
    user_head.layers[-1][1].data[cfg.d_u:] = cfg.logvar_init
    return EncoderParams(gats, node_head, user_head)


def init_decoder(rng: np.random.Generator, cfg: TrainConfig, sem_dim: int) -> DecoderParams:
    in_dim = sem_dim + cfg.d_u
    gats, d = [], in_dim
    for _ in range(cfg.dec_gat_layers):
        gats.append(GatParams.create(rng, d, cfg.dec_hidden))
        d = cfg.dec_hidden
    pos_head = DenseParams.create(rng, [cfg.dec_hidden, cfg.dec_hidden, cfg.pos_dim])
    return DecoderParams(gats, pos_head)


# -- prepared scenes and batched forwards ---------------------------------------


@dataclass
class PreparedScene:
    """Normalised, semantics-resolved view of one scene."""

    template: str
    names: list[str]
    sem: np.ndarray        # (n, codec.input_dim) constant rows
    pos: np.ndarray        # (n, D) normalised positions (zeros when unplaced)
    placed: np.ndarray     # bool per node


def _clamp(t: Tensor, lo: float, hi: float) -> Tensor:
    return -((-(t.clip_min(lo))).clip_min(-hi))


def _gat_stack(x: Tensor, edges, layers: list[GatParams]) -> Tensor:
    h = x
    for i, layer in enumerate(layers):
        h, _ = gat_forward(h, edges, layer)
        if i != len(layers) - 1:
            h = h.elu()
    return h


def _stack_graph(scenes: list[PreparedScene], rows_per_scene: list[np.ndarray]):
    """Concatenate row subsets of scenes into supergraph arrays."""
    sem_rows, pos_rows, node_scene = [], [], []
    srcs, dsts = [], []
    offset = 0
    for s_idx, (scene, rows) in enumerate(zip(scenes, rows_per_scene)):
        n = len(rows)
        if n == 0:
            raise DataError("a scene contributed zero visible nodes")
        sem_rows.append(scene.sem[rows])
        pos_rows.append(scene.pos[rows])
        node_scene.extend([s_idx] * n)
        src, dst = full_edges(n)
        srcs.append(src + offset)
        dsts.append(dst + offset)
        offset += n
    return (np.concatenate(sem_rows), np.concatenate(pos_rows),
            (np.concatenate(srcs), np.concatenate(dsts)),
            np.asarray(node_scene, dtype=np.int64))


def encode_prepared(codec: SemanticCodec, enc: EncoderParams,
                    scenes: list[PreparedScene], visible: list[np.ndarray],
                    scene_user: np.ndarray, n_users: int, d_u: int) -> UserPosterior:
    rows = [np.flatnonzero(v) for v in visible]
    sem_np, pos_np, edges, node_scene = _stack_graph(scenes, rows)
    x = concat([codec.embed(sem_np), Tensor(pos_np)], axis=1)
    h = _gat_stack(x, edges, enc.gat_layers)
    h = dense_forward(h, enc.node_head)
    scene_enc = segment_sum(h, node_scene, len(scenes))            # add-pool per scene
    user_sum = segment_sum(scene_enc, scene_user, n_users)
    counts = np.bincount(scene_user, minlength=n_users).astype(np.float64)
    if (counts == 0).any():
        raise DataError("a user contributed no visible scenes to the encoder")
    user_enc = user_sum * (1.0 / counts)[:, None]                  # mean over scenes
    stats = dense_forward(user_enc, enc.user_head)
    mu = stats[:, :d_u]
    logvar = _clamp(stats[:, d_u:], LOGVAR_FLOOR, LOGVAR_CEIL)
    return UserPosterior(mu=mu, logvar=logvar)


def decode_prepared(codec: SemanticCodec, dec: DecoderParams,
                    scenes: list[PreparedScene], u_rows: Tensor,
                    scene_user: np.ndarray) -> Tensor:
    all_rows = [np.arange(len(s.names)) for s in scenes]
    sem_np, _, edges, node_scene = _stack_graph(scenes, all_rows)
    node_user = scene_user[node_scene]
    u_per_node = gather_rows(u_rows, node_user)
    x = concat([codec.embed(sem_np), u_per_node], axis=1)
    h = _gat_stack(x, edges, dec.gat_layers)
    return dense_forward(h, dec.pos_head)


def kl_standard_normal(post: UserPosterior) -> Tensor:
    """Closed-form KL(q || N(0, I)), summed over latent dims, per row."""
    mu, lv = post.mu, post.logvar
    return ((mu * mu + lv.exp() - 1.0 - lv) * 0.5).sum(axis=-1)


def vae_loss(pred: Tensor, target: np.ndarray, post: UserPosterior,
             beta: float, valid: np.ndarray | None = None) -> Tensor:
    """Per-coordinate mean squared error plus beta-weighted KL.

    `valid` marks target rows that actually carry a position; others are
    excluded from the reconstruction term.
    """
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} vs target {target.shape}")
    if np.isnan(pred.data).any():
        raise ValueError("NaN in predicted positions")
    if np.isnan(target[valid if valid is not None else slice(None)]).any():
        raise ValueError("NaN in reconstruction targets")
    if valid is not None:
        idx = np.flatnonzero(valid)
        if len(idx) == 0:
            raise ValueError("no valid reconstruction targets")
        diff = pred[idx] - target[idx]
    else:
        diff = pred - target
    recon = (diff * diff).mean()
    return recon + kl_standard_normal(post).sum() * beta


# -- the trained model -----------------------------------------------------------


@dataclass
class PreferenceModel:
    cfg: TrainConfig
    codec: SemanticCodec
    encoder: EncoderParams
    decoder: DecoderParams
    stats: dict[str, NormalizationStats]
    registry: dict[str, TemplateSpec]
    loss_history: list[float] = field(default_factory=list)

    def parameters(self) -> list[Tensor]:
        return (self.encoder.tensors() + self.decoder.tensors()
                + self.codec.trainables())

    def prepare_scene(self, scene: Scene) -> PreparedScene:
        if scene.template not in self.stats:
            raise ModelMismatchError(
                f"template {scene.template!r} unknown to this model")
        st = self.stats[scene.template]
        placed = scene.placed_mask()
        pos = np.zeros((len(scene), self.cfg.pos_dim))
        raw = scene.positions()
        pos[placed] = st.apply(raw[placed])
        features = [o.features for o in scene.objects]
        sem = self.codec.base_rows(scene.names(), features)
        return PreparedScene(scene.template, scene.names(), sem, pos, placed)

    def prepare_roster(self, template: str,
                       extra_names: list[str] | None = None) -> PreparedScene:
        spec = self.registry.get(template)
        if spec is None:
            raise ModelMismatchError(f"template {template!r} unknown to this model")
        names = list(spec.object_names) + list(extra_names or [])
        features = list(spec.object_features) + [None] * len(extra_names or [])
        sem = self.codec.base_rows(names, features)
        pos = np.zeros((len(names), self.cfg.pos_dim))
        return PreparedScene(template, names, sem, pos,
                             np.zeros(len(names), dtype=bool))


def encode_user(model: PreferenceModel, scenes: list[Scene]) -> UserPosterior:
    """Posterior over the preference vector from the user's example scenes."""
    if not scenes:
        raise DataError("encoding a user requires at least one scene")
    prepared, visible = [], []
    for scene in scenes:
        p = model.prepare_scene(scene)
        if not p.placed.any():
            continue
        prepared.append(p)
        visible.append(p.placed)
    if not prepared:
        raise DataError("no placed objects across the user's scenes")
    scene_user = np.zeros(len(prepared), dtype=np.int64)
    return encode_prepared(model.codec, model.encoder, prepared, visible,
                           scene_user, 1, model.cfg.d_u)


def decode_positions(model: PreferenceModel, u: np.ndarray, template: str,
                     extra_names: list[str] | None = None,
                     denormalize: bool = True) -> np.ndarray:
    """Predict a position for every roster object (plus any extras)."""
    prepared = model.prepare_roster(template, extra_names)
    u_rows = Tensor(np.asarray(u, dtype=np.float64).reshape(1, -1))
    if u_rows.shape[1] != model.cfg.d_u:
        raise ModelMismatchError(
            f"preference vector dim {u_rows.shape[1]} != model d_u {model.cfg.d_u}")
    pred = decode_prepared(model.codec, model.decoder, [prepared], u_rows,
                           np.zeros(1, dtype=np.int64)).data
    if denormalize:
        pred = model.stats[template].invert(pred)
    return pred


def reconstruct_scene(model: PreferenceModel, user_scenes: list[Scene],
                      target_template: str) -> np.ndarray:
    u = infer_mean(encode_user(model, user_scenes))
    return decode_positions(model, u, target_template)


def place_missing_object(model: PreferenceModel, user_scenes: list[Scene],
                         masked_index: int, scene_index: int = 0) -> np.ndarray:
    """Predict the withheld object's position from the rest of the scene(s)."""
    scene = user_scenes[scene_index]
    if not 0 <= masked_index < len(scene):
        raise DataError(f"mask index {masked_index} out of range")
    if scene.objects[masked_index].placed:
        raise DataError("the masked object must have its position withheld")
    u = infer_mean(encode_user(model, user_scenes))
    pred = decode_positions(model, u, scene.template)
    return pred[masked_index]


def arrange_new_scene(model: PreferenceModel, example_scenes: list[Scene],
                      new_template: str) -> np.ndarray:
    if new_template not in model.registry:
        raise ModelMismatchError(
            f"template {new_template!r} absent from the training registry")
    u = infer_mean(encode_user(model, example_scenes))
    return decode_positions(model, u, new_template)


def no_prefs_arrangement(model: PreferenceModel, template: str,
                         extra_names: list[str] | None = None) -> np.ndarray:
    """Ablation: decode with the neutral (zero) preference vector."""
    return decode_positions(model, np.zeros(model.cfg.d_u), template, extra_names)


# -- training ---------------------------------------------------------------------


def build_codec(cfg: TrainConfig, registry: dict[str, TemplateSpec],
                rng: np.random.Generator,
                table: EmbeddingTable | None = None) -> SemanticCodec:
    if cfg.semantic_mode == "onehot":
        names = sorted({n for spec in registry.values() for n in spec.object_names})
        return SemanticCodec("onehot", vocab={n: i for i, n in enumerate(names)})
    if cfg.semantic_mode == "features":
        feats = {}
        for spec in registry.values():
            for name, f in zip(spec.object_names, spec.object_features):
                if f is None:
                    raise DataError(
                        f"features mode needs a feature vector for {name!r}")
                feats[name] = np.asarray(f, dtype=np.float64)
        return SemanticCodec("features", registry_features=feats)
    if table is None:
        from .semantics import load_bundled_table
        table = load_bundled_table()
    extractor = make_extractor(rng, table.width, cfg.semantic_dim,
                               cfg.extractor_hidden)
    return SemanticCodec("word", table=table, extractor=extractor)


def _guarded_visibility(n_scenes: int, sizes: list[int], node_rate: float,
                        scene_rate: float, placed: list[np.ndarray],
                        rng: np.random.Generator) -> tuple[np.ndarray, list[np.ndarray]]:
    """Masking draw that never blinds the encoder completely."""
    scene_visible = rng.random(n_scenes) >= scene_rate if scene_rate > 0 \
        else np.ones(n_scenes, dtype=bool)
    if not scene_visible.any():
        scene_visible[rng.integers(n_scenes)] = True
    node_visible = []
    for s in range(n_scenes):
        vis = placed[s].copy()
        if scene_visible[s] and node_rate > 0:
            vis &= rng.random(sizes[s]) >= node_rate
            if not vis.any() and placed[s].any():
                choices = np.flatnonzero(placed[s])
                vis[choices[rng.integers(len(choices))]] = True
        node_visible.append(vis)
    return scene_visible, node_visible


def train(dataset: Dataset, cfg: TrainConfig,
          table: EmbeddingTable | None = None,
          progress: "callable | None" = None) -> PreferenceModel:
    """Fit encoder/decoder (and word extractor) on the dataset's users."""
    if not dataset.users:
        raise DataError("training requires a non-empty dataset")
    rng = np.random.default_rng(cfg.seed)
    stats = fit_normalizer(dataset)
    codec = build_codec(cfg, dataset.registry, rng, table)
    encoder = init_encoder(rng, cfg, codec.output_dim)
    decoder = init_decoder(rng, cfg, codec.output_dim)
    model = PreferenceModel(cfg=cfg, codec=codec, encoder=encoder,
                            decoder=decoder, stats=stats,
                            registry=dataset.registry)

    prepared_users = [[model.prepare_scene(s) for s in u.scenes]
                      for u in dataset.users]
    noise_scaled = {t: cfg.noise_sigma.get(t, 0.0) / stats[t].scale
                    for t in dataset.registry}

    params = model.parameters()
    opt = SgdMomentum(params, lr=cfg.lr, momentum=cfg.momentum)
    sched = PlateauScheduler(opt, cfg.scheduler_factor, cfg.scheduler_patience,
                             cfg.scheduler_cooldown)
    n_users = len(prepared_users)

    for epoch in range(cfg.epochs):
        if cfg.beta_warmup_epochs > 0:
            beta = cfg.beta * min(1.0, (epoch + 1) / cfg.beta_warmup_epochs)
        else:
            beta = cfg.beta
        order = rng.permutation(n_users)
        epoch_losses = []
        for start in range(0, n_users, cfg.batch_users):
            batch = order[start:start + cfg.batch_users]
            enc_scenes, enc_visible, enc_scene_user = [], [], []
            dec_scenes, dec_scene_user, targets, valids = [], [], [], []
            for u_pos, u_idx in enumerate(batch):
                scenes = prepared_users[u_idx]
                jittered = []
                for p in scenes:
                    sigma = noise_scaled.get(p.template, 0.0)
                    pos = p.pos + rng.normal(0, sigma, p.pos.shape) if sigma > 0 \
                        else p.pos
                    jittered.append(replace(p, pos=pos))
                scene_vis, node_vis = _guarded_visibility(
                    len(scenes), [len(p.names) for p in scenes],
                    cfg.node_mask_rate, cfg.scene_mask_rate,
                    [p.placed for p in scenes], rng)
                for p, sv, nv in zip(jittered, scene_vis, node_vis):
                    if sv and nv.any():
                        enc_scenes.append(p)
                        enc_visible.append(nv)
                        enc_scene_user.append(u_pos)
                    dec_scenes.append(p)
                    dec_scene_user.append(u_pos)
                    targets.append(p.pos)
                    valids.append(p.placed)
            b = len(batch)
            post = encode_prepared(codec, encoder, enc_scenes, enc_visible,
                                   np.asarray(enc_scene_user), b, cfg.d_u)
            u_rows = reparameterize(post, rng)
            pred = decode_prepared(codec, decoder, dec_scenes, u_rows,
                                   np.asarray(dec_scene_user))
            target_np = np.concatenate(targets)
            valid_np = np.concatenate(valids)
            node_user = np.concatenate([
                np.full(len(p.names), su, dtype=np.int64)
                for p, su in zip(dec_scenes, dec_scene_user)])
            loss = _batched_loss(pred, target_np, valid_np, node_user, b,
                                 post, beta)
            opt.zero_grad()
            loss.backward()
            if cfg.clip_norm is not None:
                _clip_grad_norm(params, cfg.clip_norm)
            opt.step()
            epoch_losses.append(loss.item())
        epoch_loss = float(np.mean(epoch_losses))
        model.loss_history.append(epoch_loss)
        sched.step(epoch_loss)
        if progress is not None:
            progress(epoch, epoch_loss, opt.lr)
    return model


def _clip_grad_norm(params: list[Tensor], max_norm: float) -> None:
    """Rescale gradients so their joint L2 norm stays below max_norm.

    The attention pathway trains through a long flat region followed by a
    sharp cliff; momentum at the documented learning rates overshoots the
    cliff without this.
    """
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    total = np.sqrt(total)
    if total > max_norm:
        scale = max_norm / total
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale


def _batched_loss(pred: Tensor, target: np.ndarray, valid: np.ndarray,
                  node_user: np.ndarray, n_users: int, post: UserPosterior,
                  beta: float) -> Tensor:
    """Mean over users of (per-coordinate MSE + beta * KL)."""
    idx = np.flatnonzero(valid)
    diff = pred[idx] - target[idx]
    owners = node_user[idx]
    per_user_sq = segment_sum(diff * diff, owners, n_users).sum(axis=-1)
    coord_counts = np.bincount(owners, minlength=n_users) * target.shape[1]
    if (coord_counts == 0).any():
        raise DataError("a batched user has no reconstruction targets")
    recon = per_user_sq * (1.0 / coord_counts)
    return (recon + kl_standard_normal(post) * beta).mean()


# -- serialization -----------------------------------------------------------------


def _tensor_to_json(t: Tensor) -> dict:
    return {"shape": list(t.shape), "data": t.data.reshape(-1).tolist()}


def _tensor_from_json(d: dict, requires_grad: bool = True) -> Tensor:
    return Tensor(np.asarray(d["data"], dtype=np.float64).reshape(d["shape"]),
                  requires_grad=requires_grad)


def _dense_to_json(p: DenseParams) -> dict:
    return {"layers": [[_tensor_to_json(w), _tensor_to_json(b)] for w, b in p.layers],
            "activation": p.activation, "negative_slope": p.negative_slope}


def _dense_from_json(d: dict) -> DenseParams:
    layers = [(_tensor_from_json(w), _tensor_from_json(b)) for w, b in d["layers"]]
    return DenseParams(layers, d["activation"], d["negative_slope"])


def _gat_to_json(p: GatParams) -> dict:
    return {"weight": _tensor_to_json(p.weight),
            "attention": _tensor_to_json(p.attention),
            "negative_slope": p.negative_slope}


def _gat_from_json(d: dict) -> GatParams:
    return GatParams(_tensor_from_json(d["weight"]),
                     _tensor_from_json(d["attention"]), d["negative_slope"])


def model_to_json(model: PreferenceModel) -> dict:
    cfg = model.cfg
    codec = model.codec
    semantics: dict = {"mode": codec.mode}
    if codec.mode == "onehot":
        ordered = sorted(codec.vocab, key=codec.vocab.get)
        semantics["vocab"] = ordered
    elif codec.mode == "features":
        semantics["features"] = {
            n: list(map(float, f)) for n, f in codec.registry_features.items()}
    else:
        tokens = sorted(codec.table.vocab, key=codec.table.vocab.get)
        semantics["table"] = {
            "source": codec.table.source,
            "tokens": tokens,
            "vectors": codec.table.vectors.tolist(),
        }
        semantics["extractor"] = _dense_to_json(codec.extractor)
    registry = []
    for spec in model.registry.values():
        registry.append({
            "id": spec.template_id,
            "objects": [{"name": n,
                         "features": None if f is None else list(map(float, f))}
                        for n, f in zip(spec.object_names, spec.object_features)],
            "extent": None if spec.extent is None else list(spec.extent),
            "object_radius": spec.object_radius,
        })
    return {
        "schema_version": 1,
        "kind": "preference-model",
        "config": {k: (dict(v) if isinstance(v, dict) else v)
                   for k, v in vars(cfg).items()},
        "normalization": {t: {"mean": s.mean.tolist(), "scale": s.scale}
                          for t, s in model.stats.items()},
        "registry": registry,
        "semantics": semantics,
        "encoder": {"gat": [_gat_to_json(g) for g in model.encoder.gat_layers],
                    "node_head": _dense_to_json(model.encoder.node_head),
                    "user_head": _dense_to_json(model.encoder.user_head)},
        "decoder": {"gat": [_gat_to_json(g) for g in model.decoder.gat_layers],
                    "pos_head": _dense_to_json(model.decoder.pos_head)},
        "loss_history": model.loss_history,
    }


def model_from_json(payload: dict) -> PreferenceModel:
    if payload.get("schema_version") != 1 or payload.get("kind") != "preference-model":
        raise ModelMismatchError("not a recognised model bundle")
    cfg = TrainConfig(**payload["config"])
    sem = payload["semantics"]
    if sem["mode"] == "onehot":
        codec = SemanticCodec("onehot",
                              vocab={n: i for i, n in enumerate(sem["vocab"])})
    elif sem["mode"] == "features":
        codec = SemanticCodec("features", registry_features={
            n: np.asarray(f, dtype=np.float64) for n, f in sem["features"].items()})
    else:
        t = sem["table"]
        table = EmbeddingTable(vocab={n: i for i, n in enumerate(t["tokens"])},
                               vectors=np.asarray(t["vectors"], dtype=np.float64),
                               source=t.get("source", "bundle"))
        codec = SemanticCodec("word", table=table,
                              extractor=_dense_from_json(sem["extractor"]))
    registry = {}
    for entry in payload["registry"]:
        registry[entry["id"]] = TemplateSpec(
            template_id=entry["id"],
            object_names=[o["name"] for o in entry["objects"]],
            object_features=[None if o["features"] is None
                             else np.asarray(o["features"]) for o in entry["objects"]],
            extent=None if entry["extent"] is None else tuple(entry["extent"]),
            object_radius=entry.get("object_radius", 0.04),
        )
    stats = {t: NormalizationStats(np.asarray(s["mean"]), float(s["scale"]))
             for t, s in payload["normalization"].items()}
    encoder = EncoderParams(
        [_gat_from_json(g) for g in payload["encoder"]["gat"]],
        _dense_from_json(payload["encoder"]["node_head"]),
        _dense_from_json(payload["encoder"]["user_head"]))
    decoder = DecoderParams(
        [_gat_from_json(g) for g in payload["decoder"]["gat"]],
        _dense_from_json(payload["decoder"]["pos_head"]))
    return PreferenceModel(cfg=cfg, codec=codec, encoder=encoder, decoder=decoder,
                           stats=stats, registry=registry,
                           loss_history=list(payload.get("loss_history", [])))


def save_model(model: PreferenceModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), sort_keys=True))


def load_model(path: str | Path) -> PreferenceModel:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelMismatchError(f"model bundle is not valid JSON: {exc}") from exc
    return model_from_json(payload)
