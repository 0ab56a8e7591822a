"""Experiment harness: single-pass evaluation and k-fold cross-validation.

One :class:`AlgoSpec` names everything runnable on a test episode:
position baselines, the gold oracle, graph-centrality summarizers, and
the supervised models (prefixed ``sup-``, trained per fold inside
``cross_validate``).  Reports carry macro F1 (mean of fold means, the
headline number), pooled micro F1, aspect coverage for turning-point
models, and per-fold parameter digests so leakage tests can compare
trained weights bit for bit.
"""

from __future__ import annotations

import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._util import round_half_up, sha256_bytes
from .corpus import split_folds
from .embedding import build_tfidf, scene_mean, TfidfModel
from .graphsum import (
    SummarySelection,
    baseline,
    build_graph,
    build_graph_sparse,
    centrality_directed,
    centrality_summer,
    character_scores,
    power_iteration,
    select_top,
)
from .metrics import (
    coverage,
    coverage_unclamped,
    f1_selection,
    scenes_per_tp,
    tp_aspect_table,
)
from .summarizers import FIXED_TP_MODES, MODEL_KINDS, TrainConfig, train
from .tpnet import predict_tp_scenes, tp_posterior, tp_scores, tpnet_from_state

__all__ = [
    "BASELINE_ALGOS",
    "UNSUPERVISED_ALGOS",
    "SUPERVISED_ALGOS",
    "ALL_ALGOS",
    "AlgoSpec",
    "EpisodeEval",
    "FoldEval",
    "EvalReport",
    "summarize_episode",
    "eval_episode",
    "evaluate_corpus",
    "cross_validate",
]

BASELINE_ALGOS = ("lead", "last", "mixed")
UNSUPERVISED_ALGOS = ("textrank-tfidf", "textrank-neural", "summer-unsup", "scenesum")
SUPERVISED_ALGOS = tuple(f"sup-{kind}" for kind in MODEL_KINDS)
ALL_ALGOS = BASELINE_ALGOS + ("oracle",) + UNSUPERVISED_ALGOS + SUPERVISED_ALGOS

_NEEDS_STORE = ("textrank-neural", "summer-unsup", "scenesum") + SUPERVISED_ALGOS


@dataclass
class AlgoSpec:
    """Everything needed to run one summarizer over test episodes.

    ``ratio`` is the single selection-size knob; for supervised algos it
    overrides ``train.ratio``.  ``tp_state`` is a loaded TP checkpoint
    (name -> array), required by ``summer-unsup`` and by the one-hot
    fixed-TP ablation.
    """

    algo: str
    ratio: float = 0.3
    lambda1: float = 0.7
    edge_threshold: float = 0.2
    tp_threshold: float = 0.05
    seed: int = 0
    power_iter: bool = False
    charscore_union: bool = False
    tp_state: dict | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    regularizers: bool = True
    fixed_tps: str = "none"
    dev_fraction: float = 0.1

    def validate(self):
        if self.algo not in ALL_ALGOS:
            raise ValueError(
                f"unknown algorithm {self.algo!r}; expected one of {ALL_ALGOS}"
            )
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if not 0.0 <= self.lambda1 <= 1.0:
            raise ValueError(f"lambda1 must be in [0, 1], got {self.lambda1}")
        if not 0.0 <= self.edge_threshold < 1.0:
            raise ValueError(
                f"edge threshold must be in [0, 1), got {self.edge_threshold}"
            )
        if not 0.0 <= self.tp_threshold < 1.0:
            raise ValueError(
                f"tp threshold must be in [0, 1), got {self.tp_threshold}"
            )
        if not 0.0 <= self.dev_fraction < 1.0:
            raise ValueError(
                f"dev fraction must be in [0, 1), got {self.dev_fraction}"
            )
        if self.algo == "summer-unsup" and self.tp_state is None:
            raise ValueError(
                "summer-unsup needs a pretrained TP checkpoint (--tp-checkpoint)"
            )
        if self.fixed_tps not in FIXED_TP_MODES:
            raise ValueError(
                f"unknown fixed-TP mode {self.fixed_tps!r}; "
                f"expected one of {FIXED_TP_MODES}"
            )
        if self.fixed_tps != "none" and self.algo != "sup-summer":
            raise ValueError(
                f"fixed TPs only apply to sup-summer, not {self.algo!r}"
            )
        if self.fixed_tps == "onehot" and self.tp_state is None:
            raise ValueError("fixed_tps='onehot' needs a pretrained TP checkpoint")
        if self.tp_state is not None and self.algo not in (
            "summer-unsup",
            "sup-summer",
        ):
            raise ValueError(f"a TP checkpoint does not apply to {self.algo!r}")
        self.train.validate()

    def kind(self):
        """Model kind for supervised algos, else None."""
        return self.algo[4:] if self.algo in SUPERVISED_ALGOS else None

    def describe(self):
        """JSON-safe descriptor for manifests and reports."""
        out = {
            "algo": self.algo,
            "ratio": self.ratio,
            "seed": self.seed,
        }
        if self.algo in ("textrank-tfidf", "textrank-neural", "summer-unsup",
                         "scenesum"):
            out["lambda1"] = 0.5 if self.algo == "textrank-tfidf" else self.lambda1
            out["edge_threshold"] = self.edge_threshold
            out["power_iter"] = self.power_iter
        if self.algo == "scenesum":
            out["charscore_union"] = self.charscore_union
        if self.algo in ("summer-unsup", "sup-summer"):
            out["tp_threshold"] = self.tp_threshold
            out["pretrained"] = self.tp_state is not None
        if self.algo in SUPERVISED_ALGOS:
            out["regularizers"] = self.regularizers
            out["fixed_tps"] = self.fixed_tps
            out["dev_fraction"] = self.dev_fraction
            cfg = replace(self.train, ratio=self.ratio)
            out["train"] = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
        return out


def _episode_seed(base, episode_id):
    """Stable per-episode seed for the mixed baseline's sampling."""
    return (base & 0xFFFFFFFF) ^ zlib.crc32(episode_id.encode("utf-8"))


def _scene_reps(store, screenplay):
    return np.stack(
        [scene_mean(m) for m in store.episode_matrices(screenplay)]
    )


def summarize_episode(spec, screenplay, store=None, tfidf=None):
    """Run an unsupervised algo, baseline, or oracle on one episode.

    Returns ``(selection, posterior)``; the posterior is the (n, 5) TP
    attention matrix for ``summer-unsup`` and None otherwise.
    """
    algo = spec.algo
    n = len(screenplay)
    if algo in BASELINE_ALGOS:
        seed = _episode_seed(spec.seed, screenplay.episode_id) if algo == "mixed" else None
        return baseline(algo, n, spec.ratio, seed), None
    if algo == "oracle":
        gold = tuple(sorted(screenplay.gold_indices()))
        return SummarySelection(selected=gold, m=len(gold)), None
    if algo == "textrank-tfidf":
        if tfidf is None:
            raise ValueError("textrank-tfidf needs a fitted tf*idf model")
        vecs = [tfidf.scene_vector(s) for s in screenplay.scenes]
        graph = build_graph_sparse(vecs, TfidfModel.sparse_cosine, spec.edge_threshold)
        scored = (
            power_iteration(graph)
            if spec.power_iter
            else centrality_directed(graph, 0.5)  # undirected variant
        )
        return select_top(scored.scores, spec.ratio), None
    if store is None:
        raise ValueError(f"{algo} needs scene embeddings")
    graph = build_graph(_scene_reps(store, screenplay), spec.edge_threshold)
    if algo == "textrank-neural":
        scored = (
            power_iteration(graph)
            if spec.power_iter
            else centrality_directed(graph, spec.lambda1)
        )
        return select_top(scored.scores, spec.ratio), None
    if algo == "scenesum":
        f = character_scores(screenplay, union=spec.charscore_union)
        scored = centrality_summer(graph, spec.lambda1, f)
        return select_top(scored.scores, spec.ratio), None
    if algo == "summer-unsup":
        net = tpnet_from_state(spec.tp_state)
        posterior = tp_posterior(
            net,
            store.episode_matrices(screenplay),
            spec.train.tau,
            spec.train.window_fraction,
        )
        scored = centrality_summer(graph, spec.lambda1, tp_scores(posterior))
        return select_top(scored.scores, spec.ratio), posterior
    raise ValueError(f"{algo} cannot run without a trained model")


@dataclass
class EpisodeEval:
    episode_id: str
    selected: tuple
    f1: float
    coverage: float | None = None
    coverage_unclamped: float | None = None
    tp_sets: tuple | None = None

    def to_json_dict(self):
        return {
            "episode_id": self.episode_id,
            "selected": list(self.selected),
            "f1": self.f1,
            "coverage": self.coverage,
            "coverage_unclamped": self.coverage_unclamped,
            "tp_sets": [list(s) for s in self.tp_sets] if self.tp_sets else None,
        }


def eval_episode(spec, screenplay, store=None, tfidf=None, model=None):
    """Score one labeled episode; returns an :class:`EpisodeEval`."""
    if model is not None:
        selection, posterior = model.select(screenplay, store)
    else:
        selection, posterior = summarize_episode(spec, screenplay, store, tfidf)
    out = EpisodeEval(
        episode_id=screenplay.episode_id,
        selected=tuple(selection.selected),
        f1=f1_selection(selection.selected, screenplay.gold_indices()),
    )
    if posterior is not None:
        out.tp_sets = predict_tp_scenes(posterior, spec.tp_threshold)
        aspects = screenplay.aspect_map()
        try:
            out.coverage = coverage(out.tp_sets, aspects)
            out.coverage_unclamped = coverage_unclamped(out.tp_sets, aspects)
        except ValueError:
            warnings.warn(
                f"episode {screenplay.episode_id} has no aspect annotations; "
                "skipping coverage"
            )
    return out


@dataclass
class FoldEval:
    fold: int
    test_ids: tuple
    episodes: list = field(default_factory=list)
    mean_f1: float | None = None
    error: str | None = None
    param_digest: str | None = None

    def to_json_dict(self):
        return {
            "fold": self.fold,
            "test_ids": list(self.test_ids),
            "episodes": [e.to_json_dict() for e in self.episodes],
            "mean_f1": self.mean_f1,
            "error": self.error,
            "param_digest": self.param_digest,
        }


@dataclass
class EvalReport:
    algo: dict
    folds: list
    macro_f1: float | None
    micro_f1: float | None
    episode_mean_f1: float | None
    coverage: float | None
    coverage_unclamped: float | None
    scenes_per_tp_mean: float | None
    aspect_table: np.ndarray | None

    @property
    def failed_folds(self):
        return [f.fold for f in self.folds if f.error is not None]

    def to_json_dict(self):
        table = None
        if self.aspect_table is not None:
            table = [
                [None if np.isnan(x) else float(x) for x in row]
                for row in self.aspect_table
            ]
        return {
            "algo": self.algo,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "episode_mean_f1": self.episode_mean_f1,
            "coverage": self.coverage,
            "coverage_unclamped": self.coverage_unclamped,
            "scenes_per_tp": self.scenes_per_tp_mean,
            "aspect_table": table,
            "folds": [f.to_json_dict() for f in self.folds],
        }

    def to_text_table(self):
        """Plain-text summary: headline row, then per-fold breakdown."""

        def fmt(x, width=10):
            return f"{'-':>{width}}" if x is None else f"{x:>{width}.2f}"

        lines = []
        lines.append(f"algorithm: {self.algo['algo']}")
        lines.append(f"{'F1':>10}{'Coverage':>10}{'scenes/TP':>10}")
        lines.append(
            fmt(self.macro_f1) + fmt(self.coverage) + fmt(self.scenes_per_tp_mean)
        )
        lines.append("")
        lines.append(f"{'fold':>6}  {'mean F1':>8}  test episodes")
        for f in self.folds:
            if f.error is not None:
                lines.append(f"{f.fold:>6}  {'FAILED':>8}  {f.error}")
            else:
                lines.append(
                    f"{f.fold:>6}  {f.mean_f1:>8.2f}  {','.join(f.test_ids)}"
                )
        if self.aspect_table is not None:
            lines.append("")
            lines.append("turning point x aspect coverage (%):")
            header = "".join(f"{k.value[:10]:>12}" for k in _aspect_kinds())
            lines.append(" " * 4 + header)
            for j, row in enumerate(self.aspect_table):
                cells = "".join(
                    f"{'-':>12}" if np.isnan(x) else f"{x:>12.1f}" for x in row
                )
                lines.append(f"tp{j:<2}" + cells)
        return "\n".join(lines) + "\n"


def _aspect_kinds():
    from .corpus import AspectKind

    return list(AspectKind)


def _state_digest(state):
    """Order-independent fingerprint of a parameter dict."""
    blob = bytearray()
    for name in sorted(state):
        arr = np.ascontiguousarray(np.asarray(state[name], dtype=np.float64))
        blob += name.encode("utf-8") + b"\x00"
        blob += str(arr.shape).encode("ascii") + b"\x00"
        blob += arr.tobytes()
    return sha256_bytes(bytes(blob))


def _micro_f1(pairs):
    """Pooled F1 over (selected, gold) pairs."""
    hits = sel = gold = 0
    for selected, gold_set in pairs:
        hits += len(set(selected) & set(gold_set))
        sel += len(selected)
        gold += len(gold_set)
    precision = hits / sel if sel else 0.0
    recall = hits / gold if gold else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 200.0 * precision * recall / (precision + recall)


def _assemble_report(spec, folds, corpus):
    gold_by_id = {ep.episode_id: ep.gold_indices() for ep in corpus}
    aspects_by_id = {ep.episode_id: ep.aspect_map() for ep in corpus}
    all_evals = [e for f in folds for e in f.episodes]
    ok_folds = [f for f in folds if f.error is None]
    macro = (
        float(np.mean([f.mean_f1 for f in ok_folds])) if ok_folds else None
    )
    micro = (
        _micro_f1((e.selected, gold_by_id[e.episode_id]) for e in all_evals)
        if all_evals
        else None
    )
    episode_mean = (
        float(np.mean([e.f1 for e in all_evals])) if all_evals else None
    )
    covered = [e.coverage for e in all_evals if e.coverage is not None]
    covered_raw = [
        e.coverage_unclamped for e in all_evals if e.coverage_unclamped is not None
    ]
    with_tps = [e for e in all_evals if e.tp_sets is not None]
    return EvalReport(
        algo=spec.describe(),
        folds=folds,
        macro_f1=macro,
        micro_f1=micro,
        episode_mean_f1=episode_mean,
        coverage=float(np.mean(covered)) if covered else None,
        coverage_unclamped=float(np.mean(covered_raw)) if covered_raw else None,
        scenes_per_tp_mean=(
            scenes_per_tp([e.tp_sets for e in with_tps]) if with_tps else None
        ),
        aspect_table=(
            tp_aspect_table(
                [(e.tp_sets, aspects_by_id[e.episode_id]) for e in with_tps]
            )
            if with_tps
            else None
        ),
    )


def evaluate_corpus(spec, corpus, store=None, model=None):
    """Single-pass evaluation over every episode (no training here).

    Supervised algos need ``model`` (a :class:`summarizers.Model`, e.g.
    rebuilt from a saved training result).
    """
    spec.validate()
    if spec.algo in SUPERVISED_ALGOS and model is None:
        raise ValueError(f"{spec.algo} needs a trained model checkpoint")
    if spec.algo in _NEEDS_STORE and store is None:
        raise ValueError(f"{spec.algo} needs scene embeddings")
    tfidf = build_tfidf(corpus) if spec.algo == "textrank-tfidf" else None
    evals = [
        eval_episode(spec, ep, store, tfidf, model)
        for ep in corpus
    ]
    fold = FoldEval(
        fold=0,
        test_ids=tuple(ep.episode_id for ep in corpus),
        episodes=evals,
        mean_f1=float(np.mean([e.f1 for e in evals])),
    )
    return _assemble_report(spec, [fold], corpus)


def _carve_dev(train_ids, dev_fraction, rng):
    """Deterministically reserve a dev slice from the training ids."""
    if dev_fraction == 0.0 or len(train_ids) < 2:
        return tuple(train_ids), ()
    n_dev = max(1, round_half_up(dev_fraction * len(train_ids)))
    n_dev = min(n_dev, len(train_ids) - 1)
    perm = rng.permutation(len(train_ids))
    dev = {train_ids[i] for i in perm[:n_dev]}
    return (
        tuple(i for i in train_ids if i not in dev),
        tuple(i for i in train_ids if i in dev),
    )


def _run_fold(args):
    spec, corpus, store, split_folds_ids, fold_idx, seed = args
    test_ids = split_folds_ids[fold_idx]
    all_ids = [i for ids in split_folds_ids for i in ids]
    train_ids = tuple(i for i in all_ids if i not in set(test_ids))
    test_eps = [corpus.by_id(i) for i in test_ids]
    fold = FoldEval(fold=fold_idx, test_ids=tuple(test_ids))
    try:
        model = None
        tfidf = build_tfidf(corpus) if spec.algo == "textrank-tfidf" else None
        if spec.algo in SUPERVISED_ALGOS:
            rng = np.random.default_rng((seed, fold_idx))
            fit_ids, dev_ids = _carve_dev(train_ids, spec.dev_fraction, rng)
            cfg = replace(spec.train, ratio=spec.ratio)
            result = train(
                [corpus.by_id(i) for i in fit_ids],
                [corpus.by_id(i) for i in dev_ids],
                store,
                spec.kind(),
                cfg,
                pretrained_state=spec.tp_state,
                regularizers=spec.regularizers,
                fixed_tps=spec.fixed_tps,
            )
            fold.param_digest = _state_digest(result.state)
            model = result.build()
        fold.episodes = [
            eval_episode(spec, ep, store, tfidf, model) for ep in test_eps
        ]
        fold.mean_f1 = float(np.mean([e.f1 for e in fold.episodes]))
    except Exception as exc:  # annotated per fold, surfaced in the report
        fold.error = f"{type(exc).__name__}: {exc}"
        fold.episodes = []
    return fold


def cross_validate(spec, corpus, store=None, k=10, seed=0, jobs=1):
    """k-fold cross-validation; supervised algos train inside each fold.

    Class weights, dev carving, and early stopping only ever see the
    training side of a fold.  With ``jobs > 1`` folds run in separate
    processes; assembly stays order-stable either way.
    """
    spec.validate()
    if spec.algo in _NEEDS_STORE and store is None:
        raise ValueError(f"{spec.algo} needs scene embeddings")
    split = split_folds(corpus, k, seed)
    args = [
        (spec, corpus, store, split.folds, fold_idx, seed)
        for fold_idx in range(k)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(_run_fold, args))
    else:
        folds = [_run_fold(a) for a in args]
    return _assemble_report(spec, folds, corpus)
