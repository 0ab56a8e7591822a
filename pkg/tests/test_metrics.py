"""Selection F1, aspect coverage, and the aggregate tables."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screensum.corpus import TP_COUNT, AspectKind
from screensum.metrics import (
    coverage,
    coverage_unclamped,
    f1_selection,
    scenes_per_tp,
    tp_aspect_table,
)

KINDS = list(AspectKind)

index_sets = st.frozensets(st.integers(min_value=0, max_value=29), max_size=8)


class TestF1:
    def test_hand_case(self):
        # P = R = 2/3 on {0,1,2} vs {1,2,3}
        assert f1_selection({0, 1, 2}, {1, 2, 3}) == pytest.approx(200.0 / 3.0)

    def test_perfect_and_disjoint(self):
        assert f1_selection({4, 7}, {4, 7}) == 100.0
        assert f1_selection({0, 1}, {2, 3}) == 0.0

    def test_empty_sets_give_zero(self):
        assert f1_selection(set(), {1, 2}) == 0.0
        assert f1_selection({1, 2}, set()) == 0.0
        assert f1_selection(set(), set()) == 0.0

    def test_accepts_any_iterables(self):
        assert f1_selection((1, 2, 2), [2, 1]) == 100.0

    @given(index_sets, index_sets)
    def test_bounded_and_symmetric(self, a, b):
        f = f1_selection(a, b)
        assert 0.0 <= f <= 100.0
        # precision and recall swap roles, F1 is unchanged
        assert f == pytest.approx(f1_selection(b, a))

    @given(index_sets, index_sets)
    def test_relabeling_invariance(self, a, b):
        remap = lambda s: {3 * i + 11 for i in s}
        assert f1_selection(a, b) == pytest.approx(
            f1_selection(remap(a), remap(b))
        )


def _tps(*sets):
    return tuple(frozenset(s) for s in sets)


def coverage_oracle(tp_sets, aspect_sets, max_distance=1):
    """Literal definition: an aspect counts once if any TP scene is near
    any of its scenes."""
    present = [s for s in aspect_sets.values() if s]
    covered = 0
    for scenes in present:
        if any(
            abs(i - a) <= max_distance
            for tp in tp_sets
            for i in tp
            for a in scenes
        ):
            covered += 1
    return 100.0 * covered / len(present)


class TestCoverage:
    def test_hand_case_half_covered(self):
        tp_sets = _tps({4}, {20}, {21}, {22}, {23})
        aspects = {AspectKind.CRIME_SCENE: {3}, AspectKind.VICTIM: {10}}
        assert coverage(tp_sets, aspects) == 50.0

    def test_clamped_vs_unclamped(self):
        # three TPs crowd the single aspect at scene 3
        tp_sets = _tps({2}, {3}, {4}, {20}, {21})
        aspects = {AspectKind.MOTIVE: {3}}
        assert coverage(tp_sets, aspects) == 100.0
        assert coverage_unclamped(tp_sets, aspects) == 300.0

    def test_empty_aspect_entries_ignored(self):
        tp_sets = _tps({1}, {2}, {3}, {4}, {5})
        aspects = {AspectKind.VICTIM: set(), AspectKind.EVIDENCE: {2}}
        assert coverage(tp_sets, aspects) == 100.0

    def test_no_aspects_raises(self):
        tp_sets = _tps({1}, {2}, {3}, {4}, {5})
        with pytest.raises(ValueError, match="no aspects"):
            coverage(tp_sets, {})
        with pytest.raises(ValueError, match="no aspects"):
            coverage(tp_sets, {AspectKind.VICTIM: set()})

    def test_wrong_tp_count_raises(self):
        with pytest.raises(ValueError, match="turning-point sets"):
            coverage(_tps({1}, {2}), {AspectKind.VICTIM: {1}})

    def test_all_tp_sets_empty(self):
        tp_sets = _tps(set(), set(), set(), set(), set())
        assert coverage(tp_sets, {AspectKind.VICTIM: {5}}) == 0.0

    def test_max_distance_zero_means_exact_hit(self):
        tp_sets = _tps({4}, {9}, {9}, {9}, {9})
        aspects = {AspectKind.VICTIM: {3}}
        assert coverage(tp_sets, aspects, max_distance=0) == 0.0
        assert coverage(tp_sets, aspects, max_distance=1) == 100.0

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(80):
            n = int(rng.integers(2, 51))
            tp_sets = tuple(
                frozenset(
                    int(i)
                    for i in rng.choice(
                        n, size=int(rng.integers(0, min(4, n + 1))), replace=False
                    )
                )
                for _ in range(TP_COUNT)
            )
            aspects = {}
            for kind in KINDS:
                if rng.random() < 0.6:
                    size = int(rng.integers(1, min(4, n + 1)))
                    aspects[kind] = {
                        int(i) for i in rng.choice(n, size=size, replace=False)
                    }
            if not any(aspects.values()):
                aspects[KINDS[0]] = {0}
            got = coverage(tp_sets, aspects)
            assert got == coverage_oracle(tp_sets, aspects)
            assert 0.0 <= got <= 100.0
            assert coverage_unclamped(tp_sets, aspects) >= got


class TestAspectTable:
    def test_shape_and_nan_columns(self):
        ep1 = (
            _tps({0}, {2}, {4}, {6}, {8}),
            {AspectKind.CRIME_SCENE: {1}, AspectKind.VICTIM: {8}},
        )
        ep2 = (
            _tps({1}, {3}, {5}, {7}, {9}),
            {AspectKind.CRIME_SCENE: {9}},
        )
        table = tp_aspect_table([ep1, ep2])
        assert table.shape == (TP_COUNT, len(KINDS))
        crime = KINDS.index(AspectKind.CRIME_SCENE)
        victim = KINDS.index(AspectKind.VICTIM)
        # crime scene: ep1 hit by tp0 ({0} near {1}) and tp1 ({2} near {1});
        # ep2 hit by tp4 ({9}). Two episodes carry the aspect.
        assert table[0, crime] == 50.0
        assert table[1, crime] == 50.0
        assert table[4, crime] == 50.0
        assert table[2, crime] == 0.0
        # victim appears only in ep1, adjacent to tp4
        assert table[4, victim] == 100.0
        assert table[3, victim] == 0.0
        # motive appears nowhere: NaN column
        motive = KINDS.index(AspectKind.MOTIVE)
        assert np.all(np.isnan(table[:, motive]))

    def test_no_nans_when_all_kinds_present(self):
        aspects = {kind: {i} for i, kind in enumerate(KINDS)}
        table = tp_aspect_table([(_tps({0}, {1}, {2}, {3}, {4}), aspects)])
        assert not np.any(np.isnan(table))
        assert np.all((table == 0.0) | (table == 100.0))

    def test_empty_iterable_raises(self):
        with pytest.raises(ValueError, match="at least one episode"):
            tp_aspect_table([])

    def test_wrong_tp_count_raises(self):
        with pytest.raises(ValueError, match="turning-point sets"):
            tp_aspect_table([(_tps({0}), {AspectKind.VICTIM: {0}})])


class TestScenesPerTp:
    def test_single_episode(self):
        sets = _tps({0}, {1}, {2}, {3, 4}, {5})
        assert scenes_per_tp([sets]) == pytest.approx(1.2)

    def test_mean_of_episode_means(self):
        singles = _tps({0}, {1}, {2}, {3}, {4})
        doubles = _tps({0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9})
        assert scenes_per_tp([singles, doubles]) == pytest.approx(1.5)

    def test_empty_sets_count_zero(self):
        sets = _tps(set(), set(), set(), set(), {7})
        assert scenes_per_tp([sets]) == pytest.approx(0.2)

    def test_errors(self):
        with pytest.raises(ValueError, match="at least one episode"):
            scenes_per_tp([])
        with pytest.raises(ValueError, match="turning-point sets"):
            scenes_per_tp([_tps({0}, {1})])
