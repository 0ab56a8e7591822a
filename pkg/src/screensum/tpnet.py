"""Latent turning-point network over scene sequences.

Pipeline: each scene's sentence embeddings run through a bidirectional
LSTM with attention pooling (scene vector), a second bidirectional LSTM
contextualizes scenes across the episode (s'), a context interaction
layer appends windowed-neighborhood similarity features (t), and five
attention heads with a sharp temperature softmax produce one distribution
over scenes per turning point.

Turning points, in order: introductory event, change of plans, point of
no return, major setback, climax.  Their canonical screen-time positions
drive the discrete Gaussian position prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from ._util import round_half_up
from .corpus import TP_COUNT, TP_POSITION_FRACTIONS

__all__ = [
    "ForwardCtx",
    "load_named_state",
    "LstmParams",
    "BiLstmParams",
    "AttnParams",
    "EncoderParams",
    "TpNetParams",
    "tpnet_from_state",
    "encode_scene",
    "contextualize",
    "cil",
    "tp_attention",
    "tp_posterior",
    "tp_scores",
    "position_prior",
    "pretrain_loss",
    "pretrain_step",
    "predict_tp_scenes",
    "posterior_onehot",
]


@dataclass
class ForwardCtx:
    """Run-mode switches threaded through model forwards."""

    training: bool = False
    dropout: float = 0.0
    rng: np.random.Generator | None = None


def _maybe_dropout(x, ctx):
    if ctx.training and ctx.dropout > 0.0:
        return nc.dropout(x, ctx.dropout, ctx.rng)
    return x


# ---------------------------------------------------------------------------
# parameter containers


def _uniform(rng, bound, shape):
    return nc.Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def load_named_state(named_pairs, state):
    """Copy checkpoint arrays into parameter tensors, checking shapes."""
    for name, tensor in named_pairs:
        if name not in state:
            raise ValueError(f"checkpoint is missing tensor {name!r}")
        arr = np.asarray(state[name], dtype=np.float64)
        if arr.shape != tensor.values.shape:
            raise ValueError(
                f"checkpoint tensor {name!r} has shape {arr.shape}, "
                f"expected {tensor.values.shape}"
            )
        tensor.values = arr.copy()


@dataclass
class LstmParams:
    """Fused four-gate cell: gate order input, forget, cell, output."""

    W: nc.Tensor  # (4H, D) input weights
    U: nc.Tensor  # (4H, H) recurrent weights
    b: nc.Tensor  # (4H,)

    @classmethod
    def init(cls, rng, input_dim, hidden):
        bound = 1.0 / np.sqrt(hidden)
        return cls(
            W=_uniform(rng, bound, (4 * hidden, input_dim)),
            U=_uniform(rng, bound, (4 * hidden, hidden)),
            b=_uniform(rng, bound, (4 * hidden,)),
        )

    @property
    def hidden(self):
        return self.U.shape[1]

    def named(self, prefix):
        yield f"{prefix}.W", self.W
        yield f"{prefix}.U", self.U
        yield f"{prefix}.b", self.b


@dataclass
class BiLstmParams:
    fwd: LstmParams
    bwd: LstmParams

    @classmethod
    def init(cls, rng, input_dim, hidden):
        return cls(
            fwd=LstmParams.init(rng, input_dim, hidden),
            bwd=LstmParams.init(rng, input_dim, hidden),
        )

    @property
    def out_dim(self):
        return 2 * self.fwd.hidden

    def named(self, prefix):
        yield from self.fwd.named(f"{prefix}.fwd")
        yield from self.bwd.named(f"{prefix}.bwd")


@dataclass
class AttnParams:
    """Additive attention: score(h) = v . tanh(W h + b)."""

    W: nc.Tensor
    b: nc.Tensor
    v: nc.Tensor

    @classmethod
    def init(cls, rng, input_dim, attn_hidden):
        return cls(
            W=_uniform(rng, 1.0 / np.sqrt(input_dim), (attn_hidden, input_dim)),
            b=nc.Tensor(np.zeros(attn_hidden), requires_grad=True),
            v=_uniform(rng, 1.0 / np.sqrt(attn_hidden), (attn_hidden,)),
        )

    def named(self, prefix):
        yield f"{prefix}.W", self.W
        yield f"{prefix}.b", self.b
        yield f"{prefix}.v", self.v


@dataclass
class EncoderParams:
    """Sentence-level encoder plus scene-level contextualizer, shared by
    every supervised model."""

    sent_rnn: BiLstmParams
    sent_attn: AttnParams
    ctx_rnn: BiLstmParams

    @classmethod
    def init(cls, rng, embed_dim, hidden=64, attn_hidden=64):
        sent = BiLstmParams.init(rng, embed_dim, hidden)
        return cls(
            sent_rnn=sent,
            sent_attn=AttnParams.init(rng, sent.out_dim, attn_hidden),
            ctx_rnn=BiLstmParams.init(rng, sent.out_dim, hidden),
        )

    @property
    def scene_dim(self):
        return self.ctx_rnn.out_dim

    def named(self, prefix="encoder"):
        yield from self.sent_rnn.named(f"{prefix}.sent_rnn")
        yield from self.sent_attn.named(f"{prefix}.sent_attn")
        yield from self.ctx_rnn.named(f"{prefix}.ctx_rnn")


@dataclass
class TpNetParams:
    """Encoder stack plus five scalar attention heads over CIL features."""

    encoder: EncoderParams
    head_w: list  # TP_COUNT tensors of shape (scene_dim + 3,)
    head_b: list  # TP_COUNT scalar tensors

    @classmethod
    def init(cls, rng, embed_dim, hidden=64, attn_hidden=64):
        encoder = EncoderParams.init(rng, embed_dim, hidden, attn_hidden)
        t_dim = encoder.scene_dim + 3
        bound = 1.0 / np.sqrt(t_dim)
        head_w = [_uniform(rng, bound, (t_dim,)) for _ in range(TP_COUNT)]
        head_b = [nc.Tensor(np.zeros(()), requires_grad=True) for _ in range(TP_COUNT)]
        return cls(encoder=encoder, head_w=head_w, head_b=head_b)

    def named(self, prefix="tpnet"):
        yield from self.encoder.named(f"{prefix}.encoder")
        for j in range(TP_COUNT):
            yield f"{prefix}.head.{j}.w", self.head_w[j]
            yield f"{prefix}.head.{j}.b", self.head_b[j]

    def tensors(self):
        return [t for _, t in self.named()]

    def load_state(self, state, prefix="tpnet"):
        load_named_state(self.named(prefix), state)


def tpnet_from_state(state, prefix="tpnet"):
    """Rebuild a TP network from checkpoint arrays, inferring its sizes."""
    try:
        w_in = np.asarray(state[f"{prefix}.encoder.sent_rnn.fwd.W"])
        u_rec = np.asarray(state[f"{prefix}.encoder.sent_rnn.fwd.U"])
        attn_w = np.asarray(state[f"{prefix}.encoder.sent_attn.W"])
    except KeyError as exc:
        raise ValueError(f"checkpoint is missing tensor {exc}") from None
    params = TpNetParams.init(
        np.random.default_rng(0),
        embed_dim=w_in.shape[1],
        hidden=u_rec.shape[1],
        attn_hidden=attn_w.shape[0],
    )
    params.load_state(state, prefix)
    return params


# ---------------------------------------------------------------------------
# recurrent forward


def _lstm_step(p, x, h, c):
    hidden = p.hidden
    z = nc.add(nc.add(nc.matmul(p.W, x), nc.matmul(p.U, h)), p.b)
    i = nc.sigmoid(nc.slice_vec(z, 0, hidden))
    f = nc.sigmoid(nc.slice_vec(z, hidden, 2 * hidden))
    g = nc.tanh(nc.slice_vec(z, 2 * hidden, 3 * hidden))
    o = nc.sigmoid(nc.slice_vec(z, 3 * hidden, 4 * hidden))
    c_next = nc.add(nc.mul(f, c), nc.mul(i, g))
    h_next = nc.mul(o, nc.tanh(c_next))
    return h_next, c_next


def _run_lstm(p, xs, reverse=False):
    hidden = p.hidden
    h = nc.constant(np.zeros(hidden))
    c = nc.constant(np.zeros(hidden))
    order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    out = [None] * len(xs)
    for idx in order:
        h, c = _lstm_step(p, xs[idx], h, c)
        out[idx] = h
    return out


def bilstm(p, xs):
    """Bidirectional pass; position i gets [forward_h_i ; backward_h_i]."""
    fwd = _run_lstm(p.fwd, xs)
    bwd = _run_lstm(p.bwd, xs, reverse=True)
    return [nc.concat([f, b]) for f, b in zip(fwd, bwd)]


def attention_pool(p, hs):
    """Additive-attention weighted sum; a single item gets weight 1."""
    scores = [nc.matmul(p.v, nc.tanh(nc.add(nc.matmul(p.W, h), p.b))) for h in hs]
    weights = nc.softmax_t(nc.concat(scores), tau=1.0)
    return nc.weighted_sum(hs, weights)


def encode_scene(encoder, sentence_matrix, ctx=None):
    """Sentence embeddings (n_sentences, embed_dim) -> one scene vector."""
    ctx = ctx or ForwardCtx()
    matrix = np.asarray(sentence_matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError("encode_scene needs a non-empty (n_sentences, dim) matrix")
    xs = [nc.constant(matrix[s]) for s in range(matrix.shape[0])]
    pooled = attention_pool(encoder.sent_attn, bilstm(encoder.sent_rnn, xs))
    return _maybe_dropout(pooled, ctx)


def contextualize(encoder, scene_vectors, ctx=None):
    """Scene vectors -> episode-contextualized s' via the second BiLSTM."""
    ctx = ctx or ForwardCtx()
    if len(scene_vectors) < 1:
        raise ValueError("contextualize needs at least one scene")
    return [_maybe_dropout(h, ctx) for h in bilstm(encoder.ctx_rnn, scene_vectors)]


# ---------------------------------------------------------------------------
# context interaction layer


def cil(scene_states, window_fraction=0.2):
    """Append neighborhood-similarity features to each contextualized scene.

    Window length is ``max(1, round(window_fraction * n))``.  For scene i
    the previous window covers [i-l, i) and the next window (i, i+l]; a
    missing side contributes zero for every similarity involving it.
    Output dimension is ``scene_dim + 3``.
    """
    n = len(scene_states)
    if n == 0:
        raise ValueError("cil needs at least one scene")
    if not 0.0 < window_fraction <= 1.0:
        raise ValueError(f"window fraction must be in (0, 1], got {window_fraction}")
    l = max(1, round_half_up(window_fraction * n))
    zero = nc.constant(np.zeros(()))
    out = []
    for i, s in enumerate(scene_states):
        prev = scene_states[max(0, i - l): i]
        nxt = scene_states[i + 1: i + 1 + l]
        w_prev = nc.mean(prev) if prev else None
        w_next = nc.mean(nxt) if nxt else None
        c_prev = nc.cosine(s, w_prev) if w_prev is not None else zero
        c_next = nc.cosine(s, w_next) if w_next is not None else zero
        c_both = (
            nc.cosine(w_prev, w_next)
            if w_prev is not None and w_next is not None
            else zero
        )
        out.append(nc.concat([s, c_prev, c_next, c_both]))
    return out


# ---------------------------------------------------------------------------
# turning-point attention


def tp_attention(params, t_states, tau=0.01):
    """Five per-scene attention distributions, one column per turning point.

    Column j is ``softmax(tanh(w_j . t_i + b_j) / tau)`` over scenes i;
    every column sums to 1.
    """
    if not t_states:
        raise ValueError("tp_attention needs at least one scene")
    T = nc.stack_rows(t_states)
    cols = []
    for j in range(TP_COUNT):
        logits = nc.tanh(nc.add(nc.matmul(T, params.head_w[j]), params.head_b[j]))
        cols.append(nc.softmax_t(logits, tau=tau))
    return cols


def _forward_posterior(params, scene_matrices, tau, window_fraction, ctx):
    scene_vecs = [encode_scene(params.encoder, m, ctx) for m in scene_matrices]
    states = contextualize(params.encoder, scene_vecs, ctx)
    t_states = cil(states, window_fraction)
    return t_states, tp_attention(params, t_states, tau)


def tp_posterior(params, scene_matrices, tau=0.01, window_fraction=0.2):
    """Inference-mode posterior as an (n_scenes, 5) column-stochastic matrix.

    Runs under a private tape so calling it mid-training never pollutes
    the caller's gradient graph.
    """
    with nc.Tape():
        _, cols = _forward_posterior(
            params, scene_matrices, tau, window_fraction, ForwardCtx()
        )
    return np.stack([c.values for c in cols], axis=1)


def posterior_onehot(posterior):
    """Collapse each turning-point column to a one-hot at its argmax."""
    posterior = np.asarray(posterior)
    out = np.zeros_like(posterior)
    out[np.argmax(posterior, axis=0), np.arange(posterior.shape[1])] = 1.0
    return out


def tp_scores(posterior):
    """Per-scene importance for centrality: row-wise max over TP columns."""
    posterior = np.asarray(posterior, dtype=np.float64)
    if posterior.ndim != 2 or posterior.shape[1] != TP_COUNT:
        raise ValueError(
            f"posterior must be (n_scenes, {TP_COUNT}), got {posterior.shape}"
        )
    return posterior.max(axis=1)


def predict_tp_scenes(posterior, threshold=0.05):
    """Key-event sets: scene indices whose attention exceeds ``threshold``."""
    posterior = np.asarray(posterior)
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"threshold must be in [0, 1), got {threshold}")
    return tuple(
        tuple(int(i) for i in np.nonzero(posterior[:, j] > threshold)[0])
        for j in range(posterior.shape[1])
    )


# ---------------------------------------------------------------------------
# position prior


def position_prior(n, centers=TP_POSITION_FRACTIONS, sigma_fraction=0.05,
                   require_distinct_modes=False):
    """Discrete Gaussian prior over scene positions, one column per TP.

    Column j is a normalized Gaussian over indices 0..n-1 centered at
    ``centers[j] * (n - 1)`` with standard deviation
    ``sigma_fraction * n``.  With ``require_distinct_modes`` the five
    column modes must land on five different scenes (impossible for
    n < 5).
    """
    if n < 2:
        raise ValueError("position prior needs at least 2 scenes")
    if sigma_fraction <= 0:
        raise ValueError("sigma fraction must be positive")
    idx = np.arange(n, dtype=np.float64)
    sigma = sigma_fraction * n
    cols = []
    for center in centers:
        c = center * (n - 1)
        col = np.exp(-((idx - c) ** 2) / (2.0 * sigma * sigma))
        cols.append(col / col.sum())
    prior = np.stack(cols, axis=1)
    if require_distinct_modes:
        modes = np.argmax(prior, axis=0)
        if len(set(modes.tolist())) != len(centers):
            raise ValueError(
                f"position prior modes collide for n={n}; "
                f"{len(centers)} distinct modes are required"
            )
    return prior


# ---------------------------------------------------------------------------
# pretraining on silver labels


def _uniform_over(indices, n):
    q = np.zeros(n)
    for i in indices:
        q[i] = 1.0
    return q / q.sum()


def pretrain_loss(params, scene_matrices, silver, tau=0.01, window_fraction=0.2,
                  ctx=None):
    """Sum over turning points of KL(uniform-over-silver-set || column)."""
    n = len(scene_matrices)
    for j, scenes in enumerate(silver.tp_scenes):
        if any(i >= n for i in scenes):
            raise ValueError(
                f"silver turning-point set {j} references a scene beyond the episode"
            )
    ctx = ctx or ForwardCtx()
    _, cols = _forward_posterior(params, scene_matrices, tau, window_fraction, ctx)
    total = None
    for j in range(TP_COUNT):
        q = nc.constant(_uniform_over(silver.tp_scenes[j], n))
        term = nc.kl_div(q, cols[j])
        total = term if total is None else nc.add(total, term)
    return total


def pretrain_step(params, optimizer, scene_matrices, silver, tau=0.01,
                  window_fraction=0.2):
    """One optimization step on one episode; returns the loss value.

    Pretraining runs without dropout so a fixed seed gives a bit-stable
    trajectory.
    """
    with nc.Tape() as tape:
        loss = pretrain_loss(params, scene_matrices, silver, tau, window_fraction)
    grads = nc.backward(tape, loss)
    optimizer.step(grads)
    return loss.item()
