"""Supervised extractive summarizers and their training loop.

Three model kinds share the sentence/scene encoder stack:

* ``summarunner``: salience of each scene against an attention-pooled
  global document vector, sigmoid head per scene.
* ``summer``: turning-point attention produces five latent TP
  representations; each scene's salience against every TP is max-pooled
  before the sigmoid head.  Supports pretrained TP checkpoints and
  fixed-TP ablations.
* ``scenesum``: like summarunner but the document vector is a
  character-importance weighted sum of scene states.

The training loss is class-weighted BCE plus, for latent-TP summer
runs, an orthogonality term pushing the five attention columns apart
and a focal term tying them to the screen-time position prior.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import numcore as nc
from ._util import canonical_json
from .corpus import TP_COUNT, TP_POSITION_FRACTIONS
from .graphsum import character_scores, select_top
from .metrics import f1_selection
from .tpnet import (
    AttnParams,
    EncoderParams,
    ForwardCtx,
    TpNetParams,
    attention_pool,
    cil,
    contextualize,
    encode_scene,
    load_named_state,
    position_prior,
    posterior_onehot,
    tp_attention,
    tp_posterior,
)

__all__ = [
    "MODEL_KINDS",
    "FIXED_TP_MODES",
    "save_result",
    "load_result",
    "SummarunnerParams",
    "SummerParams",
    "ScenesumParams",
    "LossConfig",
    "TrainConfig",
    "TrainResult",
    "Model",
    "global_content",
    "salience",
    "summarunner_forward",
    "summer_forward",
    "scenesum_forward",
    "compute_class_weights",
    "orthogonality_term",
    "focal_term",
    "loss_total",
    "train",
]

MODEL_KINDS = ("summarunner", "summer", "scenesum")
FIXED_TP_MODES = ("none", "onehot", "prior")

SALIENCE_NORM_EPS = 1e-8


# ---------------------------------------------------------------------------
# parameter containers


def _init_clf(rng, in_dim):
    bound = 1.0 / np.sqrt(in_dim)
    w = nc.Tensor(rng.uniform(-bound, bound, size=in_dim), requires_grad=True)
    b = nc.Tensor(np.zeros(()), requires_grad=True)
    return w, b


@dataclass
class SummarunnerParams:
    encoder: EncoderParams
    doc_attn: AttnParams
    clf_w: nc.Tensor  # over concat(s'_i, v_i)
    clf_b: nc.Tensor

    @classmethod
    def init(cls, rng, embed_dim, hidden=64, attn_hidden=64):
        encoder = EncoderParams.init(rng, embed_dim, hidden, attn_hidden)
        dim = encoder.scene_dim
        w, b = _init_clf(rng, dim + (dim + 2))
        return cls(
            encoder=encoder,
            doc_attn=AttnParams.init(rng, dim, attn_hidden),
            clf_w=w,
            clf_b=b,
        )

    def named(self, prefix="summarunner"):
        yield from self.encoder.named(f"{prefix}.encoder")
        yield from self.doc_attn.named(f"{prefix}.doc_attn")
        yield f"{prefix}.clf.w", self.clf_w
        yield f"{prefix}.clf.b", self.clf_b

    def tensors(self):
        return [t for _, t in self.named()]

    def load_state(self, state, prefix="summarunner"):
        load_named_state(self.named(prefix), state)


@dataclass
class SummerParams:
    tpnet: TpNetParams
    clf_w: nc.Tensor  # over concat(t_i, v'_i)
    clf_b: nc.Tensor

    @classmethod
    def init(cls, rng, embed_dim, hidden=64, attn_hidden=64):
        tpn = TpNetParams.init(rng, embed_dim, hidden, attn_hidden)
        t_dim = tpn.encoder.scene_dim + 3
        w, b = _init_clf(rng, t_dim + (t_dim + 2))
        return cls(tpnet=tpn, clf_w=w, clf_b=b)

    def named(self, prefix="summer"):
        yield from self.tpnet.named(f"{prefix}.tpnet")
        yield f"{prefix}.clf.w", self.clf_w
        yield f"{prefix}.clf.b", self.clf_b

    def tensors(self):
        return [t for _, t in self.named()]

    def load_state(self, state, prefix="summer"):
        load_named_state(self.named(prefix), state)


@dataclass
class ScenesumParams:
    encoder: EncoderParams
    clf_w: nc.Tensor
    clf_b: nc.Tensor

    @classmethod
    def init(cls, rng, embed_dim, hidden=64, attn_hidden=64):
        encoder = EncoderParams.init(rng, embed_dim, hidden, attn_hidden)
        dim = encoder.scene_dim
        w, b = _init_clf(rng, dim + (dim + 2))
        return cls(encoder=encoder, clf_w=w, clf_b=b)

    def named(self, prefix="scenesum"):
        yield from self.encoder.named(f"{prefix}.encoder")
        yield f"{prefix}.clf.w", self.clf_w
        yield f"{prefix}.clf.b", self.clf_b

    def tensors(self):
        return [t for _, t in self.named()]

    def load_state(self, state, prefix="scenesum"):
        load_named_state(self.named(prefix), state)


def init_params(kind, rng, embed_dim, hidden=64, attn_hidden=64):
    if kind == "summarunner":
        return SummarunnerParams.init(rng, embed_dim, hidden, attn_hidden)
    if kind == "summer":
        return SummerParams.init(rng, embed_dim, hidden, attn_hidden)
    if kind == "scenesum":
        return ScenesumParams.init(rng, embed_dim, hidden, attn_hidden)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# ---------------------------------------------------------------------------
# forward passes


def global_content(attn, scene_states):
    """Attention-pooled global document vector over the scene states."""
    if not scene_states:
        raise ValueError("global_content needs at least one scene")
    return attention_pool(attn, scene_states)


def salience(x, d, norm_eps=SALIENCE_NORM_EPS):
    """Similarity features of one scene state against a reference vector.

    Returns concat(elementwise product, cosine, guarded normalized dot):
    dimension of ``x`` plus 2.  Zero-norm inputs are rejected by the
    cosine (the guarded feature alone would silently return 0).
    """
    b = nc.mul(x, d)
    c = nc.cosine(x, d)
    u = nc.normdot(x, d, eps=norm_eps)
    return nc.concat([b, c, u])


def _scene_states(encoder, scene_matrices, ctx):
    vecs = [encode_scene(encoder, m, ctx) for m in scene_matrices]
    return contextualize(encoder, vecs, ctx)


def _sigmoid_head(clf_w, clf_b, features):
    logits = [nc.add(nc.matmul(clf_w, x), clf_b) for x in features]
    return nc.sigmoid(nc.concat(logits))


def summarunner_forward(params, scene_matrices, ctx=None):
    """Per-scene summary probabilities from content + salience features."""
    ctx = ctx or ForwardCtx()
    states = _scene_states(params.encoder, scene_matrices, ctx)
    d = global_content(params.doc_attn, states)
    feats = [nc.concat([s, salience(s, d)]) for s in states]
    return _sigmoid_head(params.clf_w, params.clf_b, feats)


def summer_forward(params, scene_matrices, ctx=None, tau=0.01,
                   window_fraction=0.2, fixed_p=None):
    """Turning-point-aware probabilities.

    Returns ``(probs, p_cols)`` where ``p_cols`` are the five attention
    columns actually used: latent ones from the TP heads, or constants
    when ``fixed_p`` (an (n, 5) column-stochastic array) pins them.
    """
    ctx = ctx or ForwardCtx()
    states = _scene_states(params.tpnet.encoder, scene_matrices, ctx)
    t_states = cil(states, window_fraction)
    if fixed_p is None:
        p_cols = tp_attention(params.tpnet, t_states, tau)
    else:
        fixed_p = np.asarray(fixed_p, dtype=np.float64)
        if fixed_p.shape != (len(t_states), TP_COUNT):
            raise ValueError(
                f"fixed_p must have shape ({len(t_states)}, {TP_COUNT}), "
                f"got {fixed_p.shape}"
            )
        p_cols = [nc.constant(fixed_p[:, j]) for j in range(TP_COUNT)]
    tp_vecs = [nc.weighted_sum(t_states, p) for p in p_cols]
    feats = []
    for t in t_states:
        v = nc.max_pool([salience(t, tp) for tp in tp_vecs])
        feats.append(nc.concat([t, v]))
    return _sigmoid_head(params.clf_w, params.clf_b, feats), p_cols


def scenesum_forward(params, screenplay, scene_matrices, ctx=None):
    """Probabilities with the document vector attended by character scores."""
    ctx = ctx or ForwardCtx()
    if not screenplay.main_characters:
        raise ValueError(
            f"episode {screenplay.episode_id}: main-character set is empty; "
            "character-score attention is undefined"
        )
    scores = character_scores(screenplay)
    total = scores.sum()
    if total == 0.0:
        warnings.warn(
            f"episode {screenplay.episode_id}: all character scores are zero; "
            "falling back to uniform attention"
        )
        weights = np.full(len(scores), 1.0 / len(scores))
    else:
        weights = scores / total
    states = _scene_states(params.encoder, scene_matrices, ctx)
    d = nc.weighted_sum(states, nc.constant(weights))
    feats = [nc.concat([s, salience(s, d)]) for s in states]
    return _sigmoid_head(params.clf_w, params.clf_b, feats)


# ---------------------------------------------------------------------------
# loss


@dataclass
class LossConfig:
    reg_a: float = 0.15  # orthogonality weight
    reg_b: float = 0.1  # focal (prior) weight
    kl_eps: float = 1e-4
    class_weights: tuple = (1.0, 1.0)

    def validate(self):
        if self.reg_a < 0 or self.reg_b < 0:
            raise ValueError("regularizer weights must be non-negative")
        if self.kl_eps <= 0:
            raise ValueError("kl_eps must be positive")
        if len(self.class_weights) != 2 or any(w <= 0 for w in self.class_weights):
            raise ValueError("class_weights must be two positive scalars")


def compute_class_weights(episodes):
    """Inverse-frequency weights (w_negative, w_positive) over train scenes."""
    counts = np.zeros(2, dtype=np.int64)
    for ep in episodes:
        labels = ep.labels()
        counts[1] += int(labels.sum())
        counts[0] += int(labels.size - labels.sum())
    total = counts.sum()
    if total == 0:
        raise ValueError("no labeled scenes in the training episodes")
    return tuple(float(total / c) if c > 0 else 1.0 for c in counts)


def orthogonality_term(p_cols, kl_eps=1e-4):
    """Sum over ordered column pairs j != k of log(1 / (KL(p_j || p_k) + eps)).

    Maximal when all columns are identical; decreases as any pairwise
    divergence grows.
    """
    eps = nc.constant(np.asarray(kl_eps))
    total = None
    for j in range(len(p_cols)):
        for k in range(len(p_cols)):
            if j == k:
                continue
            term = nc.neg(nc.log(nc.add(nc.kl_div(p_cols[j], p_cols[k]), eps)))
            total = term if total is None else nc.add(total, term)
    return total


def focal_term(p_cols, prior):
    """Sum over columns of KL(column || position prior column)."""
    prior = np.asarray(prior, dtype=np.float64)
    total = None
    for j, p in enumerate(p_cols):
        term = nc.kl_div(p, nc.constant(prior[:, j]))
        total = term if total is None else nc.add(total, term)
    return total


def loss_total(probs, labels, cfg, p_cols=None, prior=None):
    """Weighted BCE plus optional orthogonality/focal regularizers.

    Returns ``(loss, parts)`` with float parts for logging; a part is
    None when its term is inactive.  Regularizers only apply to latent
    attention columns, so callers training with fixed TPs pass
    ``p_cols=None``.
    """
    labels = np.asarray(labels, dtype=np.float64)
    w0, w1 = cfg.class_weights
    weights = np.where(labels == 1.0, w1, w0)
    loss = nc.weighted_bce(probs, labels, weights)
    parts = {"bce": loss.item(), "o": None, "f": None}
    if p_cols is not None and cfg.reg_a > 0:
        o = orthogonality_term(p_cols, cfg.kl_eps)
        parts["o"] = o.item()
        loss = nc.add(loss, nc.mul(nc.constant(np.asarray(cfg.reg_a)), o))
    if p_cols is not None and prior is not None and cfg.reg_b > 0:
        f = focal_term(p_cols, prior)
        parts["f"] = f.item()
        loss = nc.add(loss, nc.mul(nc.constant(np.asarray(cfg.reg_b)), f))
    return loss, parts


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    hidden: int = 64
    attn_hidden: int = 64
    lr: float = 1e-3
    epochs: int = 300
    patience: int = 20
    dropout: float = 0.2
    tau: float = 0.01
    window_fraction: float = 0.2
    sigma_fraction: float = 0.05
    centers: tuple = TP_POSITION_FRACTIONS
    reg_a: float = 0.15
    reg_b: float = 0.1
    kl_eps: float = 1e-4
    ratio: float = 0.3
    seed: int = 0
    freeze_encoder: bool = False

    def validate(self):
        if self.hidden < 1 or self.attn_hidden < 1:
            raise ValueError("hidden sizes must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.patience < 1:
            raise ValueError("patience must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError("window_fraction must be in (0, 1]")
        if self.sigma_fraction <= 0:
            raise ValueError("sigma_fraction must be positive")
        if len(self.centers) != TP_COUNT:
            raise ValueError(f"centers must list {TP_COUNT} position fractions")
        if any(not 0.0 < c < 1.0 for c in self.centers):
            raise ValueError("centers must lie strictly inside (0, 1)")
        if any(a >= b for a, b in zip(self.centers, self.centers[1:])):
            raise ValueError("centers must be strictly increasing")
        if self.reg_a < 0 or self.reg_b < 0:
            raise ValueError("regularizer weights must be non-negative")
        if self.kl_eps <= 0:
            raise ValueError("kl_eps must be positive")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")


@dataclass
class TrainResult:
    """Outcome of one training run; picklable for process-pool folds."""

    kind: str
    fixed_tps: str
    embed_dim: int
    config: TrainConfig
    state: dict  # parameter name -> ndarray (best epoch)
    pretrained_state: dict | None  # frozen TP checkpoint for onehot mode
    log: list = field(default_factory=list)
    best_epoch: int | None = None
    best_dev_f1: float | None = None

    def build(self):
        return Model.from_result(self)


class Model:
    """Scoring-ready bundle: parameters plus the fixed-TP source, if any."""

    def __init__(self, kind, params, config, fixed_tps="none", frozen_tpnet=None):
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        if fixed_tps not in FIXED_TP_MODES:
            raise ValueError(f"unknown fixed-TP mode {fixed_tps!r}")
        if fixed_tps == "onehot" and frozen_tpnet is None:
            raise ValueError("onehot fixed TPs need a pretrained TP network")
        self.kind = kind
        self.params = params
        self.config = config
        self.fixed_tps = fixed_tps
        self.frozen_tpnet = frozen_tpnet

    @classmethod
    def from_result(cls, result):
        rng = np.random.default_rng(0)  # shapes only; values overwritten
        params = init_params(
            result.kind,
            rng,
            result.embed_dim,
            result.config.hidden,
            result.config.attn_hidden,
        )
        params.load_state(result.state)
        frozen = None
        if result.pretrained_state is not None:
            frozen = TpNetParams.init(
                rng, result.embed_dim, result.config.hidden, result.config.attn_hidden
            )
            frozen.load_state(result.pretrained_state)
        return cls(result.kind, params, result.config, result.fixed_tps, frozen)

    def fixed_posterior(self, n_scenes, scene_matrices):
        """The pinned (n, 5) attention matrix, or None in latent mode."""
        cfg = self.config
        if self.fixed_tps == "prior":
            return position_prior(
                n_scenes, centers=cfg.centers, sigma_fraction=cfg.sigma_fraction
            )
        if self.fixed_tps == "onehot":
            post = tp_posterior(
                self.frozen_tpnet, scene_matrices, cfg.tau, cfg.window_fraction
            )
            return posterior_onehot(post)
        return None

    def probs(self, screenplay, store, ctx=None):
        """Eval-mode forward; returns (probs array, posterior array or None).

        Runs under a private tape so scoring never pollutes a caller's
        gradient graph.
        """
        ctx = ctx or ForwardCtx()
        mats = store.episode_matrices(screenplay)
        cfg = self.config
        with nc.Tape():
            if self.kind == "summarunner":
                return summarunner_forward(self.params, mats, ctx).values.copy(), None
            if self.kind == "scenesum":
                probs = scenesum_forward(self.params, screenplay, mats, ctx)
                return probs.values.copy(), None
            fixed = self.fixed_posterior(len(mats), mats)
            probs, p_cols = summer_forward(
                self.params, mats, ctx, cfg.tau, cfg.window_fraction, fixed
            )
            posterior = np.stack([p.values for p in p_cols], axis=1)
            return probs.values.copy(), posterior

    def select(self, screenplay, store):
        probs, posterior = self.probs(screenplay, store)
        return select_top(probs, self.config.ratio), posterior


def _mean_f1(model, episodes, store):
    total = 0.0
    for ep in episodes:
        selection, _ = model.select(ep, store)
        total += f1_selection(set(selection.selected), set(ep.gold_indices()))
    return total / len(episodes)


def train(train_eps, dev_eps, store, kind, config=None, *, pretrained_state=None,
          regularizers=True, fixed_tps="none"):
    """Optimize one model on training episodes with dev-F1 early stopping.

    ``pretrained_state`` (summer only) warm-starts the TP network; with
    ``fixed_tps="onehot"`` the same checkpoint, kept frozen, pins the
    attention columns.  ``regularizers=False`` drops the orthogonality
    and focal terms.  Without dev episodes the loop keeps the best
    train-F1 parameters instead (overfit mode).  Deterministic under
    ``config.seed``.
    """
    config = config or TrainConfig()
    config.validate()
    train_eps = list(train_eps)
    dev_eps = list(dev_eps)
    if not train_eps:
        raise ValueError("empty training fold")
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if fixed_tps not in FIXED_TP_MODES:
        raise ValueError(
            f"unknown fixed-TP mode {fixed_tps!r}; expected one of {FIXED_TP_MODES}"
        )
    if fixed_tps != "none" and kind != "summer":
        raise ValueError(f"fixed TPs only apply to summer, not {kind!r}")
    if fixed_tps == "onehot" and pretrained_state is None:
        raise ValueError("fixed_tps='onehot' needs a pretrained TP checkpoint")
    if pretrained_state is not None and kind != "summer":
        raise ValueError(f"pretrained TP checkpoints only apply to summer, not {kind!r}")

    rng = np.random.default_rng(config.seed)
    params = init_params(kind, rng, store.dim, config.hidden, config.attn_hidden)
    frozen = None
    if pretrained_state is not None:
        params.tpnet.load_state(pretrained_state)
        if fixed_tps == "onehot":
            frozen = TpNetParams.init(
                np.random.default_rng(0), store.dim, config.hidden, config.attn_hidden
            )
            frozen.load_state(pretrained_state)

    model = Model(kind, params, config, fixed_tps, frozen)
    class_weights = compute_class_weights(train_eps)
    loss_cfg = LossConfig(
        reg_a=config.reg_a if regularizers else 0.0,
        reg_b=config.reg_b if regularizers else 0.0,
        kl_eps=config.kl_eps,
        class_weights=class_weights,
    )
    latent_summer = kind == "summer" and fixed_tps == "none"

    # Per-episode caches; fixed posteriors and priors never change.
    mats = {ep.episode_id: store.episode_matrices(ep) for ep in train_eps}
    labels = {ep.episode_id: ep.labels() for ep in train_eps}
    fixed = {
        ep.episode_id: model.fixed_posterior(len(ep), mats[ep.episode_id])
        for ep in train_eps
    }
    priors = {}
    if latent_summer and regularizers and config.reg_b > 0:
        for ep in train_eps:
            n = len(ep)
            if n not in priors:
                priors[n] = position_prior(
                    n, centers=config.centers, sigma_fraction=config.sigma_fraction
                )

    trainable = [
        t
        for name, t in params.named()
        if not (config.freeze_encoder and ".encoder." in name)
    ]
    opt = nc.Adam(trainable, nc.AdamConfig(lr=config.lr))

    log = []
    best_metric = -np.inf
    best_state = None
    best_epoch = None
    best_dev = None
    stale = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_eps))
        sums = {"loss": 0.0, "bce": 0.0, "o": 0.0, "f": 0.0}
        seen = {"o": 0, "f": 0}
        for idx in order:
            ep = train_eps[idx]
            ctx = ForwardCtx(training=True, dropout=config.dropout, rng=rng)
            with nc.Tape() as tape:
                if kind == "summarunner":
                    probs = summarunner_forward(params, mats[ep.episode_id], ctx)
                    p_cols = None
                elif kind == "scenesum":
                    probs = scenesum_forward(params, ep, mats[ep.episode_id], ctx)
                    p_cols = None
                else:
                    probs, p_cols = summer_forward(
                        params,
                        mats[ep.episode_id],
                        ctx,
                        config.tau,
                        config.window_fraction,
                        fixed[ep.episode_id],
                    )
                    if not latent_summer:
                        p_cols = None
                loss, parts = loss_total(
                    probs,
                    labels[ep.episode_id],
                    loss_cfg,
                    p_cols=p_cols,
                    prior=priors.get(len(ep)),
                )
            grads = nc.backward(tape, loss)
            opt.step(grads)
            sums["loss"] += loss.item()
            sums["bce"] += parts["bce"]
            for key in ("o", "f"):
                if parts[key] is not None:
                    sums[key] += parts[key]
                    seen[key] += 1

        n_train = len(train_eps)
        train_f1 = _mean_f1(model, train_eps, store)
        dev_f1 = _mean_f1(model, dev_eps, store) if dev_eps else None
        log.append(
            {
                "epoch": epoch,
                "loss": sums["loss"] / n_train,
                "bce": sums["bce"] / n_train,
                "o": sums["o"] / seen["o"] if seen["o"] else None,
                "f": sums["f"] / seen["f"] if seen["f"] else None,
                "train_f1": train_f1,
                "dev_f1": dev_f1,
            }
        )
        metric = dev_f1 if dev_eps else train_f1
        if metric > best_metric:
            best_metric = metric
            best_state = {name: t.values.copy() for name, t in params.named()}
            best_epoch = epoch
            best_dev = dev_f1
            stale = 0
        else:
            stale += 1
        if dev_eps and stale >= config.patience:
            break
        if not dev_eps and train_f1 >= 100.0:
            break

    if best_state is not None:
        params.load_state(best_state)
    return TrainResult(
        kind=kind,
        fixed_tps=fixed_tps,
        embed_dim=store.dim,
        config=replace(config),
        state=best_state or {name: t.values.copy() for name, t in params.named()},
        pretrained_state=pretrained_state,
        log=log,
        best_epoch=best_epoch,
        best_dev_f1=best_dev,
    )


# ---------------------------------------------------------------------------
# checkpoint files


def save_result(result, directory, stem="model"):
    """Write a training result as checkpoint files; returns the paths.

    Layout: ``<stem>.ckpt`` holds the weights, ``<stem>.json`` the model
    descriptor (kind, dims, config, best epoch), and, when the run was
    warm-started, ``<stem>_tpnet.ckpt`` the frozen TP checkpoint needed
    to rebuild fixed one-hot attention.  The epoch log stays with the
    caller; it is not part of the model.
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    ckpt = os.path.join(directory, f"{stem}.ckpt")
    nc.save_tensors(ckpt, result.state)
    paths.append(ckpt)
    meta = {
        "kind": result.kind,
        "fixed_tps": result.fixed_tps,
        "embed_dim": result.embed_dim,
        "config": {
            k: getattr(result.config, k)
            for k in result.config.__dataclass_fields__
        },
        "best_epoch": result.best_epoch,
        "best_dev_f1": result.best_dev_f1,
        "pretrained": result.pretrained_state is not None,
    }
    meta_path = os.path.join(directory, f"{stem}.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(meta))
    paths.append(meta_path)
    if result.pretrained_state is not None:
        tp_path = os.path.join(directory, f"{stem}_tpnet.ckpt")
        nc.save_tensors(tp_path, result.pretrained_state)
        paths.append(tp_path)
    return paths


def load_result(directory, stem="model"):
    """Rebuild a :class:`TrainResult` written by :func:`save_result`."""
    meta_path = os.path.join(directory, f"{stem}.json")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    cfg_dict = dict(meta["config"])
    if "centers" in cfg_dict:
        cfg_dict["centers"] = tuple(cfg_dict["centers"])
    pretrained = None
    if meta.get("pretrained"):
        pretrained = nc.load_tensors(os.path.join(directory, f"{stem}_tpnet.ckpt"))
    return TrainResult(
        kind=meta["kind"],
        fixed_tps=meta["fixed_tps"],
        embed_dim=int(meta["embed_dim"]),
        config=TrainConfig(**cfg_dict),
        state=nc.load_tensors(os.path.join(directory, f"{stem}.ckpt")),
        pretrained_state=pretrained,
        log=[],
        best_epoch=meta["best_epoch"],
        best_dev_f1=meta["best_dev_f1"],
    )
