"""Screenplay corpus: data model, line-delimited file formats, folds, fixtures.

Corpus file format (UTF-8, one JSON object per line, one episode per line):

    {"episode_id": "ep000",
     "main_characters": ["alice", "bruno"],
     "scenes": [{"scene_id": "ep000_s000",
                 "sentences": ["..."],
                 "characters": ["alice"],
                 "summary_label": 1,          # optional; omit when unknown
                 "aspects": ["victim"]},      # optional; only if label == 1
                ...]}

Scene indices are implicit: position in the ``scenes`` array, 0-based.

Turning-point label file (one JSON object per line):

    {"episode_id": "ep000", "tp_scenes": [[2], [7], [15], [22], [28]]}

The five arrays correspond, in order, to: introductory event, change of
plans, point of no return, major setback, climax.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from ._util import round_half_up

__all__ = [
    "AspectKind",
    "Scene",
    "Screenplay",
    "Corpus",
    "SilverTpLabels",
    "FoldSplit",
    "CorpusError",
    "TP_COUNT",
    "TP_POSITION_FRACTIONS",
    "load_corpus",
    "write_corpus",
    "load_silver_tps",
    "write_silver_tps",
    "split_folds",
    "synth_corpus",
]

TP_COUNT = 5

# Canonical screen-time fractions of the five turning points, used for
# position priors and for placing fixture labels.
TP_POSITION_FRACTIONS = (0.10, 0.25, 0.50, 0.75, 0.90)


class AspectKind(enum.Enum):
    """The six gold summary-annotation aspects, in canonical order."""

    CRIME_SCENE = "crime_scene"
    VICTIM = "victim"
    DEATH_CAUSE = "death_cause"
    PERPETRATOR = "perpetrator"
    EVIDENCE = "evidence"
    MOTIVE = "motive"


class CorpusError(Exception):
    """Raised for malformed corpus or label files; messages carry line numbers."""


@dataclass(frozen=True)
class Scene:
    scene_id: str
    index: int
    sentences: tuple[str, ...]
    characters: frozenset[str]
    summary_label: int | None = None
    aspects: tuple[AspectKind, ...] = ()

    def __post_init__(self):
        if not self.sentences:
            raise CorpusError(f"scene {self.scene_id}: sentence list is empty")
        if self.summary_label not in (None, 0, 1):
            raise CorpusError(
                f"scene {self.scene_id}: summary_label must be 0, 1 or absent"
            )
        if self.aspects and self.summary_label != 1:
            raise CorpusError(
                f"scene {self.scene_id}: aspects are only allowed on scenes "
                "with summary_label == 1"
            )


@dataclass(frozen=True)
class Screenplay:
    episode_id: str
    scenes: tuple[Scene, ...]
    main_characters: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.scenes) < 2:
            raise CorpusError(f"episode {self.episode_id}: needs at least 2 scenes")
        for pos, scene in enumerate(self.scenes):
            if scene.index != pos:
                raise CorpusError(
                    f"episode {self.episode_id}: scene indices must be "
                    f"0-based and contiguous (found {scene.index} at position {pos})"
                )

    def __len__(self):
        return len(self.scenes)

    def labels(self):
        """Summary labels as an int array; raises if any scene is unlabeled."""
        out = []
        for scene in self.scenes:
            if scene.summary_label is None:
                raise CorpusError(
                    f"episode {self.episode_id}: scene {scene.index} has no "
                    "summary label"
                )
            out.append(scene.summary_label)
        return np.asarray(out, dtype=np.int64)

    def gold_indices(self):
        return frozenset(s.index for s in self.scenes if s.summary_label == 1)

    def aspect_map(self):
        """AspectKind -> set of scene indices annotated with it."""
        out = {}
        for scene in self.scenes:
            for kind in scene.aspects:
                out.setdefault(kind, set()).add(scene.index)
        return out


@dataclass
class Corpus:
    episodes: tuple[Screenplay, ...]

    def __post_init__(self):
        seen = set()
        for ep in self.episodes:
            if ep.episode_id in seen:
                raise CorpusError(f"duplicate episode_id {ep.episode_id!r}")
            seen.add(ep.episode_id)

    def __len__(self):
        return len(self.episodes)

    def __iter__(self):
        return iter(self.episodes)

    def by_id(self, episode_id):
        for ep in self.episodes:
            if ep.episode_id == episode_id:
                return ep
        raise KeyError(episode_id)

    def subset(self, episode_ids):
        wanted = set(episode_ids)
        return Corpus(tuple(ep for ep in self.episodes if ep.episode_id in wanted))


@dataclass(frozen=True)
class SilverTpLabels:
    """Weakly-supervised turning-point scene sets for one episode."""

    episode_id: str
    tp_scenes: tuple[frozenset[int], ...]

    def __post_init__(self):
        if len(self.tp_scenes) != TP_COUNT:
            raise CorpusError(
                f"episode {self.episode_id}: expected {TP_COUNT} turning-point "
                f"sets, got {len(self.tp_scenes)}"
            )
        for j, scenes in enumerate(self.tp_scenes):
            if not scenes:
                raise CorpusError(
                    f"episode {self.episode_id}: turning-point set {j} is empty"
                )
            if any(i < 0 for i in scenes):
                raise CorpusError(
                    f"episode {self.episode_id}: negative scene index in set {j}"
                )


@dataclass(frozen=True)
class FoldSplit:
    """Partition of episode ids into k folds with sizes differing by <= 1."""

    k: int
    folds: tuple[tuple[str, ...], ...]

    def test_ids(self, fold):
        return self.folds[fold]

    def train_ids(self, fold):
        return tuple(
            ep for f, ids in enumerate(self.folds) if f != fold for ep in ids
        )


# ---------------------------------------------------------------------------
# file IO


def _parse_scene(raw, index, episode_id, line_no):
    try:
        scene_id = raw["scene_id"]
        sentences = raw["sentences"]
        characters = raw.get("characters", [])
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"line {line_no}: malformed scene record: {exc}") from None
    if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
        raise CorpusError(f"line {line_no}: scene {scene_id}: sentences must be strings")
    aspects = []
    for name in raw.get("aspects", []):
        try:
            aspects.append(AspectKind(name))
        except ValueError:
            raise CorpusError(
                f"line {line_no}: scene {scene_id}: unknown aspect {name!r}"
            ) from None
    try:
        return Scene(
            scene_id=scene_id,
            index=index,
            sentences=tuple(sentences),
            characters=frozenset(characters),
            summary_label=raw.get("summary_label"),
            aspects=tuple(aspects),
        )
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from None


def load_corpus(path):
    """Parse a line-delimited corpus file; errors carry 1-based line numbers."""
    episodes = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc}") from None
            try:
                episode_id = raw["episode_id"]
                raw_scenes = raw["scenes"]
            except (KeyError, TypeError) as exc:
                raise CorpusError(f"line {line_no}: malformed episode: {exc}") from None
            scenes = tuple(
                _parse_scene(s, i, episode_id, line_no) for i, s in enumerate(raw_scenes)
            )
            try:
                episodes.append(
                    Screenplay(
                        episode_id=episode_id,
                        scenes=scenes,
                        main_characters=frozenset(raw.get("main_characters", [])),
                    )
                )
            except CorpusError as exc:
                raise CorpusError(f"line {line_no}: {exc}") from None
    try:
        return Corpus(tuple(episodes))
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


def _scene_to_json(scene):
    out = {
        "scene_id": scene.scene_id,
        "sentences": list(scene.sentences),
        "characters": sorted(scene.characters),
    }
    if scene.summary_label is not None:
        out["summary_label"] = scene.summary_label
    if scene.aspects:
        out["aspects"] = [a.value for a in scene.aspects]
    return out


def write_corpus(corpus, path):
    """Write a corpus deterministically (fixed key order, sorted name lists)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ep in corpus:
            record = {
                "episode_id": ep.episode_id,
                "main_characters": sorted(ep.main_characters),
                "scenes": [_scene_to_json(s) for s in ep.scenes],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_silver_tps(path, corpus=None):
    """Load turning-point label records; validates against ``corpus`` if given."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                episode_id = raw["episode_id"]
                sets = raw["tp_scenes"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"line {line_no}: malformed record: {exc}") from None
            if episode_id in out:
                raise CorpusError(f"line {line_no}: duplicate episode {episode_id!r}")
            try:
                labels = SilverTpLabels(
                    episode_id=episode_id,
                    tp_scenes=tuple(frozenset(int(i) for i in s) for s in sets),
                )
            except CorpusError as exc:
                raise CorpusError(f"line {line_no}: {exc}") from None
            if corpus is not None:
                try:
                    n = len(corpus.by_id(episode_id))
                except KeyError:
                    raise CorpusError(
                        f"line {line_no}: episode {episode_id!r} not in corpus"
                    ) from None
                for j, scenes in enumerate(labels.tp_scenes):
                    bad = [i for i in scenes if i >= n]
                    if bad:
                        raise CorpusError(
                            f"line {line_no}: episode {episode_id}: turning-point "
                            f"set {j} references scene {bad[0]} but episode has "
                            f"{n} scenes"
                        )
            out[episode_id] = labels
    return out


def write_silver_tps(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for episode_id in sorted(labels):
            rec = labels[episode_id]
            fh.write(
                json.dumps(
                    {
                        "episode_id": episode_id,
                        "tp_scenes": [sorted(s) for s in rec.tp_scenes],
                    }
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# folds


def split_folds(corpus, k, seed):
    """Shuffle episodes with ``seed`` and deal them into k balanced folds."""
    n = len(corpus)
    if not 2 <= k <= n:
        raise ValueError(f"fold count must be in [2, {n}], got {k}")
    rng = np.random.default_rng(seed)
    ids = [ep.episode_id for ep in corpus]
    order = rng.permutation(n)
    folds = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(ids[idx])
    return FoldSplit(k=k, folds=tuple(tuple(f) for f in folds))


# ---------------------------------------------------------------------------
# synthetic fixture corpus

_NAME_POOL = (
    "alice", "bruno", "carla", "derek", "elena",
    "felix", "grace", "henry", "irene", "jonas",
)

_FILLER = (
    "the", "a", "into", "with", "over", "near", "then", "again", "quietly",
    "suddenly", "looks", "turns", "walks", "waits", "room", "night", "door",
    "light", "street", "silence",
)

# One topic list per act (the five turning points cut an episode into six).
_ACT_TOPICS = (
    ("body", "discovery", "crime", "scene", "victim", "blood", "witness", "report"),
    ("investigation", "lead", "suspect", "interview", "alibi", "clue", "records", "case"),
    ("pursuit", "trap", "warrant", "surveillance", "informant", "pressure", "secret", "threat"),
    ("setback", "betrayal", "escape", "cover", "loss", "confrontation", "doubt", "risk"),
    ("showdown", "chase", "arrest", "confession", "struggle", "reveal", "truth", "capture"),
    ("resolution", "closure", "aftermath", "justice", "verdict", "peace", "calm", "farewell"),
)


def _tp_centers(n):
    return [min(n - 1, round_half_up(frac * (n - 1))) for frac in TP_POSITION_FRACTIONS]


def _sentence(rng, topics):
    words = [str(rng.choice(_FILLER)) for _ in range(int(rng.integers(2, 5)))]
    words += [str(rng.choice(topics)) for _ in range(int(rng.integers(2, 4)))]
    rng.shuffle(words)
    return " ".join(words)


def synth_corpus(n_episodes, scenes_per_episode, embed_dim, seed):
    """Deterministic synthetic fixture corpus with aligned embeddings and labels.

    Returns ``(corpus, embedding_store, silver_labels)``.  Roughly 30% of
    scenes per episode carry a positive summary label (exactly
    ``max(1, round(0.3 * n))``), labels and aspects concentrate around the
    five canonical turning-point positions, and sentence embeddings are
    unit-norm vectors clustered by act so similarity graphs carry signal.
    """
    from .embedding import EmbeddingStore

    if n_episodes < 1:
        raise ValueError("need at least one episode")
    if scenes_per_episode < 2:
        raise ValueError("episodes need at least 2 scenes")
    if embed_dim < 2:
        raise ValueError("embedding dim must be at least 2")
    rng = np.random.default_rng(seed)
    episodes = []
    rows = {}
    silver = {}
    for e in range(n_episodes):
        episode_id = f"ep{e:03d}"
        n = scenes_per_episode
        centers = _tp_centers(n)

        cast = [str(c) for c in rng.choice(_NAME_POOL, size=6, replace=False)]
        main = frozenset(cast[: int(rng.integers(3, 5))])

        # Positive labels: turning-point scenes first, then their neighbors,
        # then a shuffled remainder, truncated to an exact 30% budget.
        budget = max(1, round_half_up(0.3 * n))
        ordered = []
        for c in centers:
            if c not in ordered:
                ordered.append(c)
        for c in centers:
            for nb in (c - 1, c + 1):
                if 0 <= nb < n and nb not in ordered:
                    ordered.append(nb)
        rest = [i for i in range(n) if i not in ordered]
        rng.shuffle(rest)
        positives = set((ordered + rest)[:budget])

        # Silver turning-point sets: the center scene, sometimes a neighbor.
        tp_sets = []
        for c in centers:
            s = {c}
            if c + 1 < n and rng.random() < 0.5:
                s.add(c + 1)
            tp_sets.append(frozenset(s))
        silver[episode_id] = SilverTpLabels(episode_id, tuple(tp_sets))

        # Aspects cycle over the six kinds across positive scenes.
        kinds = list(AspectKind)
        aspect_for = {}
        for slot, i in enumerate(sorted(positives)):
            assigned = [kinds[slot % len(kinds)]]
            if rng.random() < 0.3:
                assigned.append(kinds[(slot + 3) % len(kinds)])
            aspect_for[i] = tuple(assigned)

        act_centers = rng.normal(size=(len(_ACT_TOPICS), embed_dim))
        act_centers /= np.linalg.norm(act_centers, axis=1, keepdims=True)
        tp_vec_centers = rng.normal(size=(TP_COUNT, embed_dim))
        tp_vec_centers /= np.linalg.norm(tp_vec_centers, axis=1, keepdims=True)

        scenes = []
        for i in range(n):
            act = sum(1 for c in centers if c <= i)
            act = min(act, len(_ACT_TOPICS) - 1)
            near_tp = next((j for j, c in enumerate(centers) if abs(i - c) <= 1), None)
            center = tp_vec_centers[near_tp] if near_tp is not None else act_centers[act]

            n_sent = int(rng.integers(2, 6))
            sentences = tuple(_sentence(rng, _ACT_TOPICS[act]) for _ in range(n_sent))

            k_chars = int(rng.integers(1, 5))
            chars = set(str(c) for c in rng.choice(cast, size=k_chars, replace=False))
            if i in positives and rng.random() < 0.9:
                chars.add(str(rng.choice(sorted(main))))

            vecs = center[None, :] * 0.8 + rng.normal(size=(n_sent, embed_dim)) * 0.35
            vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
            rows[(episode_id, i)] = vecs

            label = 1 if i in positives else 0
            scenes.append(
                Scene(
                    scene_id=f"{episode_id}_s{i:03d}",
                    index=i,
                    sentences=sentences,
                    characters=frozenset(chars),
                    summary_label=label,
                    aspects=aspect_for.get(i, ()) if label == 1 else (),
                )
            )
        episodes.append(
            Screenplay(episode_id=episode_id, scenes=tuple(scenes), main_characters=main)
        )
    corpus = Corpus(tuple(episodes))
    store = EmbeddingStore(dim=embed_dim, rows=rows)
    return corpus, store, silver
