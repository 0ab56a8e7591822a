"""Corpus data model, file IO, folds, and the synthetic fixture generator."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screensum import corpus as cp
from screensum.embedding import write_embeddings


def _scene(idx, label=None, aspects=(), scene_id=None, sentences=("a line",), chars=()):
    return cp.Scene(
        scene_id=scene_id or f"s{idx:03d}",
        index=idx,
        sentences=tuple(sentences),
        characters=frozenset(chars),
        summary_label=label,
        aspects=tuple(aspects),
    )


def _episode(n=3, episode_id="ep000", labels=None):
    labels = labels or [None] * n
    return cp.Screenplay(
        episode_id=episode_id,
        scenes=tuple(_scene(i, label=labels[i]) for i in range(n)),
    )


# ---------------------------------------------------------------------------
# data model invariants


def test_scene_rejects_empty_sentences():
    with pytest.raises(cp.CorpusError, match="sentence list is empty"):
        _scene(0, sentences=())


def test_scene_rejects_aspects_on_unlabeled_scene():
    with pytest.raises(cp.CorpusError, match="aspects are only allowed"):
        _scene(0, label=0, aspects=(cp.AspectKind.VICTIM,))


def test_scene_accepts_aspects_on_positive_scene():
    s = _scene(0, label=1, aspects=(cp.AspectKind.MOTIVE,))
    assert s.aspects == (cp.AspectKind.MOTIVE,)


def test_screenplay_requires_two_scenes():
    with pytest.raises(cp.CorpusError, match="at least 2 scenes"):
        cp.Screenplay(episode_id="e", scenes=(_scene(0),))


def test_screenplay_requires_contiguous_indices():
    with pytest.raises(cp.CorpusError, match="contiguous"):
        cp.Screenplay(episode_id="e", scenes=(_scene(0), _scene(2)))


def test_corpus_rejects_duplicate_episode_ids():
    with pytest.raises(cp.CorpusError, match="duplicate"):
        cp.Corpus((_episode(episode_id="x"), _episode(episode_id="x")))


def test_silver_labels_need_five_nonempty_sets():
    with pytest.raises(cp.CorpusError, match="expected 5"):
        cp.SilverTpLabels("e", (frozenset({1}),) * 4)
    with pytest.raises(cp.CorpusError, match="is empty"):
        cp.SilverTpLabels("e", (frozenset({1}),) * 4 + (frozenset(),))


def test_aspect_kind_order_is_canonical():
    assert [a.value for a in cp.AspectKind] == [
        "crime_scene", "victim", "death_cause", "perpetrator", "evidence", "motive",
    ]


# ---------------------------------------------------------------------------
# file round trips and loader errors


def test_corpus_round_trip(tmp_path):
    corpus, _, _ = cp.synth_corpus(2, 6, 4, seed=3)
    path = tmp_path / "corpus.jsonl"
    cp.write_corpus(corpus, path)
    loaded = cp.load_corpus(path)
    assert len(loaded) == 2
    for orig, back in zip(corpus, loaded):
        assert orig.episode_id == back.episode_id
        assert orig.main_characters == back.main_characters
        for a, b in zip(orig.scenes, back.scenes):
            assert a == b


def test_load_corpus_reports_line_number_for_bad_json(tmp_path):
    path = tmp_path / "corpus.jsonl"
    corpus, _, _ = cp.synth_corpus(1, 3, 4, seed=0)
    cp.write_corpus(corpus, path)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(cp.CorpusError, match="line 2: invalid JSON"):
        cp.load_corpus(path)


def test_load_corpus_reports_line_number_for_label_violation(tmp_path):
    record = {
        "episode_id": "e",
        "main_characters": [],
        "scenes": [
            {"scene_id": "a", "sentences": ["x"], "characters": [],
             "summary_label": 0, "aspects": ["victim"]},
            {"scene_id": "b", "sentences": ["y"], "characters": []},
        ],
    }
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(cp.CorpusError, match="line 1.*aspects"):
        cp.load_corpus(path)


def test_load_corpus_rejects_unknown_aspect(tmp_path):
    record = {
        "episode_id": "e",
        "scenes": [
            {"scene_id": "a", "sentences": ["x"], "summary_label": 1,
             "aspects": ["weapon"]},
            {"scene_id": "b", "sentences": ["y"]},
        ],
    }
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(cp.CorpusError, match="unknown aspect 'weapon'"):
        cp.load_corpus(path)


def test_silver_round_trip_and_range_validation(tmp_path):
    corpus, _, silver = cp.synth_corpus(2, 8, 4, seed=1)
    path = tmp_path / "tps.jsonl"
    cp.write_silver_tps(silver, path)
    loaded = cp.load_silver_tps(path, corpus)
    assert loaded == silver

    bad = {"episode_id": "ep000", "tp_scenes": [[0], [1], [2], [3], [99]]}
    path.write_text(json.dumps(bad) + "\n", encoding="utf-8")
    with pytest.raises(cp.CorpusError, match="references scene 99"):
        cp.load_silver_tps(path, corpus)


def test_silver_loader_rejects_unknown_episode(tmp_path):
    corpus, _, _ = cp.synth_corpus(1, 4, 4, seed=0)
    path = tmp_path / "tps.jsonl"
    rec = {"episode_id": "nope", "tp_scenes": [[0], [0], [1], [1], [2]]}
    path.write_text(json.dumps(rec) + "\n", encoding="utf-8")
    with pytest.raises(cp.CorpusError, match="not in corpus"):
        cp.load_silver_tps(path, corpus)


# ---------------------------------------------------------------------------
# folds


def test_split_folds_sizes_for_39_episodes():
    corpus, _, _ = cp.synth_corpus(39, 2, 2, seed=0)
    split = cp.split_folds(corpus, k=10, seed=42)
    sizes = sorted(len(f) for f in split.folds)
    assert sizes == [3] + [4] * 9


@given(st.integers(4, 25), st.integers(2, 6), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_split_folds_partitions_episodes(n_eps, k, seed):
    if k > n_eps:
        k = n_eps
    corpus, _, _ = cp.synth_corpus(n_eps, 2, 2, seed=0)
    split = cp.split_folds(corpus, k=k, seed=seed)
    all_ids = [ep for fold in split.folds for ep in fold]
    assert sorted(all_ids) == sorted(e.episode_id for e in corpus)
    sizes = [len(f) for f in split.folds]
    assert max(sizes) - min(sizes) <= 1
    for fold in range(k):
        assert set(split.train_ids(fold)).isdisjoint(split.test_ids(fold))


def test_split_folds_deterministic():
    corpus, _, _ = cp.synth_corpus(9, 2, 2, seed=0)
    a = cp.split_folds(corpus, k=3, seed=7)
    b = cp.split_folds(corpus, k=3, seed=7)
    assert a == b
    c = cp.split_folds(corpus, k=3, seed=8)
    assert a != c


def test_split_folds_rejects_bad_k():
    corpus, _, _ = cp.synth_corpus(3, 2, 2, seed=0)
    with pytest.raises(ValueError):
        cp.split_folds(corpus, k=1, seed=0)
    with pytest.raises(ValueError):
        cp.split_folds(corpus, k=4, seed=0)


# ---------------------------------------------------------------------------
# synthetic fixtures


def test_synth_shape_and_label_budget():
    corpus, store, silver = cp.synth_corpus(4, 40, 16, seed=7)
    assert len(corpus) == 4
    for ep in corpus:
        assert len(ep) == 40
        labels = ep.labels()
        assert labels.sum() == 12  # round(0.3 * 40)
        for scene in ep.scenes:
            if scene.summary_label == 1:
                assert scene.aspects
            else:
                assert not scene.aspects
        tps = silver[ep.episode_id]
        for s in tps.tp_scenes:
            assert s and max(s) < 40
    assert store.dim == 16
    for ep in corpus:
        for scene in ep.scenes:
            mat = store.scene(ep.episode_id, scene.index)
            assert mat.shape == (len(scene.sentences), 16)
            np.testing.assert_allclose(np.linalg.norm(mat, axis=1), 1.0, atol=1e-9)


def test_synth_minimal_corpus_is_valid():
    corpus, store, silver = cp.synth_corpus(1, 2, 4, seed=0)
    ep = corpus.episodes[0]
    assert len(ep) == 2
    assert ep.labels().sum() == 1
    for s in silver[ep.episode_id].tp_scenes:
        assert max(s) < 2


def test_synth_files_are_byte_identical_across_runs(tmp_path):
    paths = []
    for run in ("a", "b"):
        corpus, store, silver = cp.synth_corpus(2, 12, 8, seed=99)
        base = tmp_path / run
        base.mkdir()
        cp.write_corpus(corpus, base / "corpus.jsonl")
        write_embeddings(store, corpus, base / "emb.bin")
        cp.write_silver_tps(silver, base / "tps.jsonl")
        paths.append(base)
    for name in ("corpus.jsonl", "emb.bin", "tps.jsonl"):
        assert (paths[0] / name).read_bytes() == (paths[1] / name).read_bytes()


def test_synth_different_seeds_differ():
    a, _, _ = cp.synth_corpus(1, 10, 4, seed=1)
    b, _, _ = cp.synth_corpus(1, 10, 4, seed=2)
    assert [s.sentences for s in a.episodes[0].scenes] != [
        s.sentences for s in b.episodes[0].scenes
    ]


def test_synth_silver_sets_sit_near_canonical_fractions():
    corpus, _, silver = cp.synth_corpus(1, 100, 4, seed=5)
    tps = silver["ep000"].tp_scenes
    for frac, scenes in zip(cp.TP_POSITION_FRACTIONS, tps):
        center = round(frac * 99)
        assert all(abs(i - center) <= 1 for i in scenes)


def test_labels_raises_on_unlabeled_corpus():
    ep = _episode(3)
    with pytest.raises(cp.CorpusError, match="no summary label"):
        ep.labels()


def test_aspect_map_collects_indices():
    scenes = (
        _scene(0, label=1, aspects=(cp.AspectKind.VICTIM,)),
        _scene(1, label=0),
        _scene(2, label=1, aspects=(cp.AspectKind.VICTIM, cp.AspectKind.MOTIVE)),
    )
    ep = cp.Screenplay(episode_id="e", scenes=scenes)
    amap = ep.aspect_map()
    assert amap[cp.AspectKind.VICTIM] == {0, 2}
    assert amap[cp.AspectKind.MOTIVE] == {2}
