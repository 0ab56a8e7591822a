"""Sentence-embedding store, its binary file format, and a tf*idf model.

Embedding file layout (version 1, all integers little-endian):

    magic    4 bytes   b"SEM1"
    u32      format version (1)
    u32      embedding dimension
    u32      record count (one record per scene)
    then per record, in corpus order:
    u16      episode id length in bytes, followed by the UTF-8 episode id
    u32      scene index
    u32      sentence count
    f32*     sentence count x dim little-endian floats, row-major,
             one row per sentence in scene order

Rows are stored as 32-bit floats and widened to float64 on load.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EmbeddingStore",
    "EmbeddingFileError",
    "TfidfModel",
    "load_embeddings",
    "write_embeddings",
    "scene_mean",
    "cosine",
    "tokenize",
    "build_tfidf",
]

_MAGIC = b"SEM1"
_VERSION = 1


class EmbeddingFileError(Exception):
    pass


@dataclass
class EmbeddingStore:
    """Per-scene sentence embedding matrices keyed by (episode_id, scene_index)."""

    dim: int
    rows: dict

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("embedding dim must be positive")
        for key, mat in self.rows.items():
            mat = np.asarray(mat, dtype=np.float64)
            if mat.ndim != 2 or mat.shape[1] != self.dim:
                raise ValueError(
                    f"scene {key}: expected an (n_sentences, {self.dim}) matrix, "
                    f"got shape {mat.shape}"
                )
            self.rows[key] = mat

    def scene(self, episode_id, index):
        try:
            return self.rows[(episode_id, index)]
        except KeyError:
            raise KeyError(
                f"no embeddings stored for scene ({episode_id!r}, {index})"
            ) from None

    def episode_matrices(self, screenplay):
        return [self.scene(screenplay.episode_id, s.index) for s in screenplay.scenes]

    def __len__(self):
        return len(self.rows)


def scene_mean(matrix):
    """Mean sentence vector of a scene; errors on an empty matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError("scene_mean needs a non-empty (n_sentences, dim) matrix")
    return matrix.mean(axis=0)


def cosine(u, v):
    """Cosine similarity; zero if either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


# ---------------------------------------------------------------------------
# binary file IO


def write_embeddings(store, corpus, path):
    """Write scene records in corpus order; fails if any scene is missing."""
    records = []
    for ep in corpus:
        for scene in ep.scenes:
            mat = store.scene(ep.episode_id, scene.index)
            if mat.shape[0] != len(scene.sentences):
                raise EmbeddingFileError(
                    f"scene ({ep.episode_id!r}, {scene.index}): store has "
                    f"{mat.shape[0]} rows but the scene has "
                    f"{len(scene.sentences)} sentences"
                )
            records.append((ep.episode_id, scene.index, mat))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, store.dim, len(records)))
        for episode_id, index, mat in records:
            encoded = episode_id.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<II", index, mat.shape[0]))
            fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())
    import os

    os.replace(tmp, path)


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise EmbeddingFileError(f"truncated embedding file while reading {what}")
    return data


def load_embeddings(path, corpus=None):
    """Read an embedding file; aligns against ``corpus`` when provided.

    Alignment requires exactly one record per corpus scene with a row per
    sentence; any missing scene, unknown scene, row-count mismatch, or
    header/payload inconsistency is an ``EmbeddingFileError``.
    """
    rows = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != _MAGIC:
            raise EmbeddingFileError(f"{path} is not an embedding file")
        version, dim, count = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != _VERSION:
            raise EmbeddingFileError(f"unsupported embedding format version {version}")
        if dim < 1:
            raise EmbeddingFileError(f"declared dimension {dim} is invalid")
        for r in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, f"record {r} id length"))
            episode_id = _read_exact(fh, id_len, f"record {r} id").decode("utf-8")
            index, n_sent = struct.unpack(
                "<II", _read_exact(fh, 8, f"record {r} scene header")
            )
            raw = _read_exact(fh, 4 * n_sent * dim, f"record {r} rows")
            mat = (
                np.frombuffer(raw, dtype="<f4")
                .reshape(n_sent, dim)
                .astype(np.float64)
            )
            key = (episode_id, index)
            if key in rows:
                raise EmbeddingFileError(f"duplicate record for scene {key}")
            rows[key] = mat
        if fh.read(1):
            raise EmbeddingFileError("trailing bytes after final record")
    store = EmbeddingStore(dim=dim, rows=rows)
    if corpus is not None:
        _check_alignment(store, corpus)
    return store


def _check_alignment(store, corpus):
    expected = set()
    for ep in corpus:
        for scene in ep.scenes:
            key = (ep.episode_id, scene.index)
            expected.add(key)
            if key not in store.rows:
                raise EmbeddingFileError(f"missing embeddings for scene {key}")
            got = store.rows[key].shape[0]
            if got != len(scene.sentences):
                raise EmbeddingFileError(
                    f"scene {key}: {got} embedding rows but "
                    f"{len(scene.sentences)} sentences"
                )
    unknown = set(store.rows) - expected
    if unknown:
        raise EmbeddingFileError(
            f"embedding file contains records for unknown scenes: "
            f"{sorted(unknown)[:3]}"
        )


# ---------------------------------------------------------------------------
# tf*idf

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text):
    """Lowercase and split on non-alphanumeric runs, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class TfidfModel:
    """Scene-level tf*idf: tf is the raw in-scene count, idf = ln(N / df).

    ``N`` counts every scene in the fitted corpus; document frequency is
    corpus-wide over scenes.  Scene vectors are sparse token->weight dicts.
    """

    vocabulary: dict
    idf: np.ndarray
    scene_count: int

    def scene_vector(self, scene):
        counts = {}
        for sentence in scene.sentences:
            for token in tokenize(sentence):
                idx = self.vocabulary.get(token)
                if idx is not None:
                    counts[idx] = counts.get(idx, 0) + 1
        return {idx: tf * self.idf[idx] for idx, tf in counts.items()}

    @staticmethod
    def sparse_cosine(a, b):
        if not a or not b:
            return 0.0
        if len(b) < len(a):
            a, b = b, a
        dot = sum(w * b.get(i, 0.0) for i, w in a.items())
        na = math.sqrt(sum(w * w for w in a.values()))
        nb = math.sqrt(sum(w * w for w in b.values()))
        if na == 0.0 or nb == 0.0:
            return 0.0
        return dot / (na * nb)


def build_tfidf(corpus):
    """Fit a TfidfModel over every scene of ``corpus``."""
    df = {}
    scene_count = 0
    for ep in corpus:
        for scene in ep.scenes:
            scene_count += 1
            seen = set()
            for sentence in scene.sentences:
                seen.update(tokenize(sentence))
            for token in seen:
                df[token] = df.get(token, 0) + 1
    if scene_count == 0:
        raise ValueError("cannot fit tf*idf on an empty corpus")
    vocabulary = {token: i for i, token in enumerate(sorted(df))}
    idf = np.zeros(len(vocabulary))
    for token, i in vocabulary.items():
        idf[i] = math.log(scene_count / df[token])
    return TfidfModel(vocabulary=vocabulary, idf=idf, scene_count=scene_count)
