"""Scene-graph centrality summarizers and position baselines.

A screenplay is an ordered graph of scenes; edges are cosine similarities
of scene representations (negatives clamped to zero, weak edges pruned).
Centrality variants:

* directed degree centrality: incoming (earlier) and outgoing (later)
  edge sums weighted by ``lambda1`` and ``1 - lambda1``;
* the same with additive per-scene importance scores folded into both
  sums (turning-point posteriors or character scores);
* optional undirected power iteration behind a flag for the classic
  eigenvector-style ranker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import round_half_up

__all__ = [
    "SceneGraph",
    "CentralityScores",
    "SummarySelection",
    "build_graph",
    "build_graph_sparse",
    "centrality_directed",
    "centrality_summer",
    "power_iteration",
    "character_scores",
    "select_top",
    "baseline",
    "BASELINE_KINDS",
]

BASELINE_KINDS = ("lead", "last", "mixed")


@dataclass(frozen=True)
class SceneGraph:
    """Symmetric non-negative scene similarity matrix with zero diagonal."""

    edges: np.ndarray

    def __post_init__(self):
        e = self.edges
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"edge matrix must be square, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError("edge matrix contains non-finite values")

    @property
    def n(self):
        return self.edges.shape[0]


@dataclass(frozen=True)
class CentralityScores:
    scores: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("centrality scores contain non-finite values")


@dataclass(frozen=True)
class SummarySelection:
    """Selected scene indices in screenplay order plus the target size."""

    selected: tuple[int, ...]
    m: int
    scores: tuple[float, ...] | None = None


def build_graph(scene_vectors, threshold=0.2):
    """Graph over dense scene vectors: clamped cosine, edges <= threshold pruned."""
    vectors = np.asarray(scene_vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ValueError("need a (n_scenes >= 2, dim) matrix of scene vectors")
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"edge threshold must be in [0, 1), got {threshold}")
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = vectors / safe[:, None]
    sims = unit @ unit.T
    sims[norms == 0.0, :] = 0.0
    sims[:, norms == 0.0] = 0.0
    np.clip(sims, 0.0, None, out=sims)
    sims[sims <= threshold] = 0.0
    np.fill_diagonal(sims, 0.0)
    sims = (sims + sims.T) / 2.0  # exact symmetry despite float noise
    return SceneGraph(edges=sims)


def build_graph_sparse(scene_vectors, similarity, threshold=0.2):
    """Graph over arbitrary scene representations via a similarity callable."""
    n = len(scene_vectors)
    if n < 2:
        raise ValueError("need at least 2 scenes")
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"edge threshold must be in [0, 1), got {threshold}")
    edges = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s = max(0.0, float(similarity(scene_vectors[i], scene_vectors[j])))
            if s > threshold:
                edges[i, j] = edges[j, i] = s
    return SceneGraph(edges=edges)


def _check_lambda(lambda1):
    if not 0.0 <= lambda1 <= 1.0:
        raise ValueError(f"lambda1 must be in [0, 1], got {lambda1}")


def centrality_directed(graph, lambda1=0.7):
    """Directed degree centrality.

    score_i = lambda1 * sum_{j<i} e_ij + (1 - lambda1) * sum_{j>i} e_ij
    """
    _check_lambda(lambda1)
    e = graph.edges
    earlier = np.tril(e, k=-1).sum(axis=1)
    later = np.triu(e, k=1).sum(axis=1)
    return CentralityScores(scores=lambda1 * earlier + (1.0 - lambda1) * later)


def centrality_summer(graph, lambda1, f):
    """Directed centrality with additive scene-importance scores.

    score_i = lambda1 * sum_{j<i} (e_ij + f_j)
            + (1 - lambda1) * sum_{j>i} (e_ij + f_i)

    The forward sum adds the importance of each earlier scene; the
    backward sum adds scene i's own importance once per later scene.
    With ``f == 0`` this reduces exactly to ``centrality_directed``.
    """
    _check_lambda(lambda1)
    f = np.asarray(f, dtype=np.float64)
    n = graph.n
    if f.shape != (n,):
        raise ValueError(f"importance scores must have shape ({n},), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("importance scores contain non-finite values")
    e = graph.edges
    earlier = np.tril(e, k=-1).sum(axis=1)
    later = np.triu(e, k=1).sum(axis=1)
    csum = np.concatenate([[0.0], np.cumsum(f)])
    forward = earlier + csum[:-1]  # sum of f_j over j < i
    backward = later + (n - 1 - np.arange(n)) * f
    return CentralityScores(scores=lambda1 * forward + (1.0 - lambda1) * backward)


def power_iteration(graph, iters=100, tol=1e-12):
    """Principal-eigenvector centrality on the undirected graph.

    Plain power iteration on the weighted adjacency matrix, L1-normalized
    each step; no damping or teleportation.  A graph with no edges yields
    the uniform distribution.
    """
    n = graph.n
    x = np.full(n, 1.0 / n)
    if not np.any(graph.edges):
        return CentralityScores(scores=x)
    for _ in range(iters):
        nxt = graph.edges @ x
        total = nxt.sum()
        if total <= 0.0:
            return CentralityScores(scores=np.full(n, 1.0 / n))
        nxt /= total
        if np.max(np.abs(nxt - x)) < tol:
            x = nxt
            break
        x = nxt
    return CentralityScores(scores=x)


def character_scores(screenplay, union=False):
    """Per-scene character importance.

    Default: the fraction of a scene's characters that are main characters,
    ``|S & main| / |S|``.  ``union=True`` keeps the literal union form
    ``|S | (main & cast)| / |S|`` for auditing; it is >= 1 for every scene
    with characters, so it flattens the signal.  Scenes without characters
    score 0 either way.
    """
    main = set(screenplay.main_characters)
    cast = set()
    for scene in screenplay.scenes:
        cast |= scene.characters
    scores = []
    for scene in screenplay.scenes:
        s = scene.characters
        if not s:
            scores.append(0.0)
        elif union:
            scores.append(len(s | (main & cast)) / len(s))
        else:
            scores.append(len(s & main) / len(s))
    return np.asarray(scores, dtype=np.float64)


def select_top(scores, ratio=0.3):
    """Pick the highest-scoring ``max(1, round(ratio * n))`` scenes.

    Ties break toward the lower scene index; the result is reported in
    screenplay order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty 1-d array")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite values")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    n = scores.size
    m = max(1, round_half_up(ratio * n))
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    chosen = tuple(sorted(order[:m]))
    return SummarySelection(selected=chosen, m=m, scores=tuple(float(s) for s in scores))


def baseline(kind, n, ratio=0.3, seed=None):
    """Position baselines: first M, last M, or a mix drawn from both ends.

    ``mixed`` samples ``M // 2`` indices uniformly without replacement
    from the first 30% of the episode and the remaining ``M - M // 2``
    from the last 30%, deterministically under ``seed``.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    if n < 2:
        raise ValueError("baselines need at least 2 scenes")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    m = max(1, round_half_up(ratio * n))
    if kind == "lead":
        return SummarySelection(selected=tuple(range(m)), m=m)
    if kind == "last":
        return SummarySelection(selected=tuple(range(n - m, n)), m=m)
    if seed is None:
        raise ValueError("mixed baseline requires a seed")
    window = round_half_up(0.3 * n)
    if window < 1:
        raise ValueError(f"episode too short for mixed baseline (n={n})")
    k_first = m // 2
    k_last = m - k_first
    if k_first > window or k_last > window:
        raise ValueError(
            f"mixed baseline cannot draw {k_first}+{k_last} scenes from "
            f"30% windows of size {window}"
        )
    rng = np.random.default_rng(seed)
    first = rng.choice(window, size=k_first, replace=False)
    last = n - window + rng.choice(window, size=k_last, replace=False)
    chosen = sorted(set(int(i) for i in first) | set(int(i) for i in last))
    return SummarySelection(selected=tuple(chosen), m=m)
