"""Scene-level evaluation metrics.

F1 treats summary selection as binary classification over scenes and is
reported on a 0..100 scale.  Coverage asks how many of an episode's
investigation aspects (crime scene, victim, cause of death, perpetrator,
evidence, motive) sit within one scene of a predicted turning point.
"""

from __future__ import annotations

import numpy as np

from .corpus import AspectKind, TP_COUNT

__all__ = [
    "f1_selection",
    "coverage",
    "coverage_unclamped",
    "tp_aspect_table",
    "scenes_per_tp",
]


def f1_selection(selected, gold):
    """F1 of the positive class, scaled to [0, 100].

    Zero when precision and recall are both zero (including an empty
    gold set or an empty selection).
    """
    selected = set(selected)
    gold = set(gold)
    hits = len(selected & gold)
    precision = hits / len(selected) if selected else 0.0
    recall = hits / len(gold) if gold else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 200.0 * precision * recall / (precision + recall)


def _min_distance(tp_set, aspect_scenes):
    """Smallest |i - a| over the cross pairs; inf when either set is empty."""
    if not tp_set or not aspect_scenes:
        return np.inf
    return min(abs(i - a) for i in tp_set for a in aspect_scenes)


def _covering_counts(tp_sets, aspect_sets, max_distance=1):
    if len(tp_sets) != TP_COUNT:
        raise ValueError(f"expected {TP_COUNT} turning-point sets, got {len(tp_sets)}")
    present = {k: s for k, s in aspect_sets.items() if s}
    if not present:
        raise ValueError("coverage is undefined for an episode with no aspects")
    counts = {}
    for kind, scenes in present.items():
        counts[kind] = sum(
            1 for tp in tp_sets if _min_distance(tp, scenes) <= max_distance
        )
    return counts


def coverage(tp_sets, aspect_sets, max_distance=1):
    """Percentage of present aspects with some TP within ``max_distance``.

    Each aspect contributes at most 1 regardless of how many turning
    points land near it, so the result is always in [0, 100].  Raises
    on an episode with no aspect annotations.
    """
    counts = _covering_counts(tp_sets, aspect_sets, max_distance)
    covered = sum(1 for c in counts.values() if c > 0)
    return 100.0 * covered / len(counts)


def coverage_unclamped(tp_sets, aspect_sets, max_distance=1):
    """Audit variant: the raw double sum, which can exceed 100 when
    several turning points crowd one aspect."""
    counts = _covering_counts(tp_sets, aspect_sets, max_distance)
    return 100.0 * sum(counts.values()) / len(counts)


def tp_aspect_table(episodes, max_distance=1):
    """Per-TP x per-aspect coverage percentages over many episodes.

    ``episodes`` is an iterable of ``(tp_sets, aspect_sets)`` pairs.  The
    cell for (turning point j, aspect a) is the percentage of episodes
    containing aspect a in which TP j lies within ``max_distance`` of
    one of its scenes.  Aspects absent corpus-wide get NaN columns.
    """
    kinds = list(AspectKind)
    near = np.zeros((TP_COUNT, len(kinds)))
    totals = np.zeros(len(kinds))
    episodes = list(episodes)
    if not episodes:
        raise ValueError("tp_aspect_table needs at least one episode")
    for tp_sets, aspect_sets in episodes:
        if len(tp_sets) != TP_COUNT:
            raise ValueError(
                f"expected {TP_COUNT} turning-point sets, got {len(tp_sets)}"
            )
        for a, kind in enumerate(kinds):
            scenes = aspect_sets.get(kind)
            if not scenes:
                continue
            totals[a] += 1
            for j, tp in enumerate(tp_sets):
                if _min_distance(tp, scenes) <= max_distance:
                    near[j, a] += 1
    table = np.full((TP_COUNT, len(kinds)), np.nan)
    mask = totals > 0
    table[:, mask] = 100.0 * near[:, mask] / totals[mask]
    return table


def scenes_per_tp(per_episode_tp_sets):
    """Mean turning-point set size, averaged within then across episodes."""
    per_episode_tp_sets = list(per_episode_tp_sets)
    if not per_episode_tp_sets:
        raise ValueError("scenes_per_tp needs at least one episode")
    means = []
    for tp_sets in per_episode_tp_sets:
        if len(tp_sets) != TP_COUNT:
            raise ValueError(
                f"expected {TP_COUNT} turning-point sets, got {len(tp_sets)}"
            )
        means.append(sum(len(s) for s in tp_sets) / TP_COUNT)
    return float(np.mean(means))
