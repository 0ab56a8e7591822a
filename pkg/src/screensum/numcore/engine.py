"""Reverse-mode automatic differentiation on dense float64 arrays.

The engine is deliberately small: a ``Tensor`` wraps a numpy array, every
primitive op records a node on the active ``Tape`` (execution order is
already a topological order), and ``backward`` replays the tape once in
reverse, accumulating vector-Jacobian products into a ``Gradients`` map.

Only the primitives needed by the summarization models are provided.  All
ops trap non-finite outputs immediately so a NaN cannot propagate silently
through a training run.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "backward",
    "constant",
    "add",
    "sub",
    "neg",
    "mul",
    "matmul",
    "concat",
    "slice_vec",
    "stack_rows",
    "tanh",
    "sigmoid",
    "log",
    "softmax_t",
    "mean",
    "weighted_sum",
    "max_pool",
    "dropout",
    "cosine",
    "normdot",
    "weighted_bce",
    "kl_div",
]


class Tensor:
    """Dense float64 array plus a flag marking it as a gradient target.

    ``requires_grad=True`` on a leaf makes it a trainable parameter; on op
    outputs the flag is set automatically while a tape is active.
    """

    __slots__ = ("values", "requires_grad")

    def __init__(self, values, requires_grad=False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size

    def item(self):
        return float(self.values)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.values.shape}{flag})"

    # Small amount of operator sugar; everything routes through the ops
    # below so recording stays in one place.
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)


def constant(values):
    """Wrap values in a Tensor that never receives gradient."""
    return Tensor(values, requires_grad=False)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    """One executed op: output, parents, and the vector-Jacobian product."""

    __slots__ = ("name", "out", "parents", "vjp")

    def __init__(self, name, out, parents, vjp):
        self.name = name
        self.out = out
        self.parents = parents
        self.vjp = vjp


_TAPE_STACK: list["Tape"] = []


class Tape:
    """Ordered record of executed ops.

    Use as a context manager around the forward pass.  Nodes are appended
    in execution order, which is a valid topological order of the graph,
    so the backward sweep can simply walk the list in reverse and visit
    each node exactly once.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self.nodes)


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} produced a non-finite value")
    return arr


def _record(name, out_values, parents, vjp):
    """Build the output tensor and push a tape node if gradient can flow."""
    out = Tensor(_finite(name, out_values))
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape.nodes.append(_Node(name, out, tuple(parents), vjp))
    return out


class Gradients:
    """Mapping from tensors (by identity) to accumulated gradient arrays."""

    def __init__(self, by_id):
        self._by_id = by_id

    def of(self, tensor):
        """Gradient of the loss w.r.t. ``tensor``; raises if none flowed."""
        try:
            return self._by_id[id(tensor)]
        except KeyError:
            raise KeyError(
                "no gradient recorded for this tensor; it is either detached "
                "(requires_grad=False) or unused by the loss"
            ) from None

    def get(self, tensor):
        """Like ``of`` but returns None for tensors without gradient."""
        return self._by_id.get(id(tensor))

    def __contains__(self, tensor):
        return id(tensor) in self._by_id

    def __len__(self):
        return len(self._by_id)


def backward(tape, loss):
    """Reverse sweep over ``tape`` from scalar ``loss``.

    Returns a ``Gradients`` map covering every tensor that gradient
    reached, including all participating ``requires_grad`` leaves.
    """
    if loss.ndim != 0:
        raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
    recorded = {id(node.out) for node in tape.nodes}
    if id(loss) not in recorded:
        raise ValueError("loss was not produced on this tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones(())}
    for node in reversed(tape.nodes):
        g_out = grads.get(id(node.out))
        if g_out is None:
            continue
        parent_grads = node.vjp(g_out)
        for parent, g in zip(node.parents, parent_grads):
            if g is None or not parent.requires_grad:
                continue
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + g
            else:
                grads[pid] = np.asarray(g, dtype=np.float64)
    return Gradients(grads)


# ---------------------------------------------------------------------------
# arithmetic


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (only scalar broadcasting is allowed)."""
    if shape == ():
        return np.sum(grad)
    return grad


def _check_elementwise_shapes(name, a, b):
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ValueError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


def add(a, b):
    _check_elementwise_shapes("add", a, b)

    def vjp(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))

    return _record("add", a.values + b.values, (a, b), vjp)


def sub(a, b):
    _check_elementwise_shapes("sub", a, b)

    def vjp(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))

    return _record("sub", a.values - b.values, (a, b), vjp)


def neg(a):
    def vjp(g):
        return (-g,)

    return _record("neg", -a.values, (a,), vjp)


def mul(a, b):
    """Elementwise product; same shapes, or one side scalar."""
    _check_elementwise_shapes("mul", a, b)
    av, bv = a.values, b.values

    def vjp(g):
        return (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape))

    return _record("mul", av * bv, (a, b), vjp)


def matmul(a, b):
    """Matrix/vector product covering the (2,2), (2,1), (1,2), (1,1) cases."""
    av, bv = a.values, b.values
    if av.ndim == 0 or bv.ndim == 0:
        raise ValueError("matmul requires 1-d or 2-d operands")
    if av.ndim == 1 and bv.ndim == 1 and av.shape != bv.shape:
        raise ValueError(f"matmul: dot of mismatched vectors {av.shape} vs {bv.shape}")

    def vjp(g):
        if av.ndim == 2 and bv.ndim == 2:
            return (g @ bv.T, av.T @ g)
        if av.ndim == 2 and bv.ndim == 1:
            return (np.outer(g, bv), av.T @ g)
        if av.ndim == 1 and bv.ndim == 2:
            return (bv @ g, np.outer(av, g))
        return (g * bv, g * av)

    return _record("matmul", av @ bv, (a, b), vjp)


# ---------------------------------------------------------------------------
# shape ops


def concat(parts):
    """Concatenate scalars and 1-d vectors into one 1-d vector."""
    parts = list(parts)
    if not parts:
        raise ValueError("concat of an empty list")
    sizes = []
    for p in parts:
        if p.ndim > 1:
            raise ValueError("concat only supports scalars and 1-d vectors")
        sizes.append(p.size)
    out = np.concatenate([np.atleast_1d(p.values) for p in parts])
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        grads = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            piece = g[lo:hi]
            grads.append(piece[0] if p.ndim == 0 else piece)
        return grads

    return _record("concat", out, parts, vjp)


def slice_vec(x, lo, hi):
    """Contiguous slice of a 1-d vector."""
    if x.ndim != 1:
        raise ValueError("slice_vec expects a 1-d vector")
    n = x.size
    if not (0 <= lo <= hi <= n):
        raise ValueError(f"slice [{lo}:{hi}] out of bounds for length {n}")

    def vjp(g):
        full = np.zeros(n)
        full[lo:hi] = g
        return (full,)

    return _record("slice", x.values[lo:hi], (x,), vjp)


def stack_rows(rows):
    """Stack equal-length 1-d vectors into a 2-d matrix (one per row)."""
    rows = list(rows)
    if not rows:
        raise ValueError("stack_rows of an empty list")
    d = rows[0].size
    for r in rows:
        if r.ndim != 1 or r.size != d:
            raise ValueError("stack_rows requires equal-length 1-d vectors")

    def vjp(g):
        return [g[i] for i in range(len(rows))]

    return _record("stack_rows", np.stack([r.values for r in rows]), rows, vjp)


# ---------------------------------------------------------------------------
# nonlinearities


def tanh(x):
    out = np.tanh(x.values)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _record("tanh", out, (x,), vjp)


def sigmoid(x):
    # Stable split form: exp is only taken of non-positive arguments.
    v = x.values
    out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.clip(v, 0, None))),
                   np.exp(np.clip(v, None, 0)) / (1.0 + np.exp(np.clip(v, None, 0))))

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _record("sigmoid", out, (x,), vjp)


def log(x):
    if np.any(x.values <= 0):
        raise FloatingPointError("log of a non-positive value")
    xv = x.values

    def vjp(g):
        return (g / xv,)

    return _record("log", np.log(xv), (x,), vjp)


def softmax_t(x, tau=1.0):
    """Temperature softmax over a 1-d vector with max-subtraction.

    ``softmax(x / tau)``; invariant to adding a constant to every logit.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if x.ndim != 1:
        raise ValueError("softmax_t expects a 1-d vector")
    z = x.values / tau
    z = z - np.max(z)
    e = np.exp(z)
    out = e / np.sum(e)

    def vjp(g):
        return ((out * (g - np.dot(g, out))) / tau,)

    return _record("softmax_t", out, (x,), vjp)


# ---------------------------------------------------------------------------
# pooling and aggregation


def weighted_sum(vectors, weights):
    """``sum_k weights[k] * vectors[k]`` for a list of equal-length vectors."""
    vectors = list(vectors)
    if weights.ndim != 1 or len(vectors) != weights.size:
        raise ValueError("weighted_sum: one weight per vector required")
    mat = np.stack([v.values for v in vectors])
    wv = weights.values
    out = wv @ mat

    def vjp(g):
        grads = [wv[k] * g for k in range(len(vectors))]
        grads.append(mat @ g)
        return grads

    return _record("weighted_sum", out, (*vectors, weights), vjp)


def mean(vectors):
    """Arithmetic mean of a non-empty list of equal-length vectors."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("mean of an empty list")
    w = constant(np.full(len(vectors), 1.0 / len(vectors)))
    return weighted_sum(vectors, w)


def max_pool(vectors):
    """Elementwise max over a list of vectors; gradient follows the argmax.

    Ties route gradient to the earliest vector in the list.
    """
    vectors = list(vectors)
    if not vectors:
        raise ValueError("max_pool of an empty list")
    mat = np.stack([v.values for v in vectors])
    winners = np.argmax(mat, axis=0)
    out = mat[winners, np.arange(mat.shape[1])]

    def vjp(g):
        grads = []
        for k in range(len(vectors)):
            gk = np.where(winners == k, g, 0.0)
            grads.append(gk)
        return grads

    return _record("max_pool", out, vectors, vjp)


def dropout(x, p, rng):
    """Inverted-scaling dropout; identity when ``p == 0``.

    Kept entries are scaled by ``1/(1-p)`` so the expected output equals
    the input.  ``rng`` must be a ``numpy.random.Generator``; the caller
    controls determinism through it.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if p == 0.0:
        def vjp_id(g):
            return (g,)
        return _record("dropout", x.values.copy(), (x,), vjp_id)
    mask = (rng.random(x.shape) >= p) / (1.0 - p)

    def vjp(g):
        return (g * mask,)

    return _record("dropout", x.values * mask, (x,), vjp)


# ---------------------------------------------------------------------------
# similarity features


def cosine(u, v):
    """Cosine similarity of two 1-d vectors; errors on zero norm."""
    uv, vv = u.values, v.values
    if uv.ndim != 1 or vv.ndim != 1 or uv.shape != vv.shape:
        raise ValueError("cosine expects two equal-length 1-d vectors")
    nu = float(np.linalg.norm(uv))
    nv = float(np.linalg.norm(vv))
    if nu == 0.0 or nv == 0.0:
        raise FloatingPointError("cosine of a zero vector")
    c = float(np.dot(uv, vv) / (nu * nv))

    def vjp(g):
        gu = g * (vv / (nu * nv) - c * uv / (nu * nu))
        gv = g * (uv / (nu * nv) - c * vv / (nv * nv))
        return (gu, gv)

    return _record("cosine", np.asarray(c), (u, v), vjp)


def normdot(u, v, eps=1e-8):
    """Dot product over a guarded norm product: ``u.v / max(|u||v|, eps)``.

    Behaves like cosine away from zero vectors but stays finite (and
    differentiable in ``u`` and ``v``) when either norm collapses.
    """
    uv, vv = u.values, v.values
    if uv.ndim != 1 or vv.ndim != 1 or uv.shape != vv.shape:
        raise ValueError("normdot expects two equal-length 1-d vectors")
    if eps <= 0:
        raise ValueError("normdot guard eps must be positive")
    nu = float(np.linalg.norm(uv))
    nv = float(np.linalg.norm(vv))
    prod = nu * nv
    dot = float(np.dot(uv, vv))
    denom = max(prod, eps)
    out = dot / denom

    def vjp(g):
        if prod > eps:
            gu = g * (vv / denom - out * uv / (nu * nu))
            gv = g * (uv / denom - out * vv / (nv * nv))
        else:
            # The guard is active: denominator is the constant eps.
            gu = g * vv / eps
            gv = g * uv / eps
        return (gu, gv)

    return _record("normdot", np.asarray(out), (u, v), vjp)


# ---------------------------------------------------------------------------
# losses


_BCE_CLIP = 1e-12


def weighted_bce(probs, labels, weights):
    """Mean weighted binary cross-entropy over already-squashed probabilities.

    ``labels`` and ``weights`` are plain arrays (no gradient); ``probs``
    is a 1-d tensor of values in (0, 1).  Probabilities are clipped to
    ``[1e-12, 1 - 1e-12]`` inside the logs only.
    """
    labels = np.asarray(labels, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if probs.ndim != 1 or probs.shape != labels.shape or probs.shape != weights.shape:
        raise ValueError("weighted_bce expects equal-length 1-d probs/labels/weights")
    p = np.clip(probs.values, _BCE_CLIP, 1.0 - _BCE_CLIP)
    n = p.size
    terms = -(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))
    out = np.sum(weights * terms) / n

    def vjp(g):
        dp = weights * (-(labels / p) + (1.0 - labels) / (1.0 - p)) / n
        return (g * dp,)

    return _record("weighted_bce", np.asarray(out), (probs,), vjp)


_KL_SUM_TOL = 1e-6


def kl_div(p, q):
    """Discrete KL divergence ``KL(p || q)`` in nats.

    Both inputs must sum to 1 within 1e-6; they are renormalized exactly
    (with gradient through the renormalization) before the divergence is
    taken.  Zero mass in ``p`` contributes nothing; zero mass in ``q``
    where ``p`` has mass is an error (the divergence would be infinite).
    """
    pv, qv = p.values, q.values
    if pv.ndim != 1 or qv.ndim != 1 or pv.shape != qv.shape:
        raise ValueError("kl_div expects two equal-length 1-d vectors")
    if np.any(pv < 0) or np.any(qv < 0):
        raise ValueError("kl_div inputs must be non-negative")
    ps, qs = float(np.sum(pv)), float(np.sum(qv))
    if abs(ps - 1.0) > _KL_SUM_TOL or abs(qs - 1.0) > _KL_SUM_TOL:
        raise ValueError(
            f"kl_div inputs must sum to 1 within {_KL_SUM_TOL} (got {ps!r}, {qs!r})"
        )
    ph = pv / ps
    qh = qv / qs
    support = ph > 0
    if np.any(qh[support] == 0):
        raise FloatingPointError("kl_div is infinite: q has zero mass where p > 0")
    ratio = np.ones_like(ph)
    ratio[support] = ph[support] / qh[support]
    out = float(np.sum(ph[support] * np.log(ratio[support])))

    def vjp(g):
        # d/dp_j = (log(ph_j/qh_j) - KL) / ps on the support, 0 elsewhere.
        dp = np.zeros_like(ph)
        dp[support] = (np.log(ratio[support]) - out) / ps
        dq = (1.0 - np.where(qh > 0, ph / np.where(qh > 0, qh, 1.0), 0.0)) / qs
        return (g * dp, g * dq)

    return _record("kl_div", np.asarray(out), (p, q), vjp)
