"""Encode a corpus file offline and write the embedding file it pairs with.

Reads the line-delimited corpus format, runs every sentence through the
chosen encoder in batches, and writes the binary embedding file the
screensum engine loads, one float32 row per sentence in (episode, scene,
sentence) file order.  A JSON manifest lands next to the output file
recording the encoder id, the dim, a sha256 of the corpus bytes, the
sentence count, and a timestamp.

Both files are written through a temp-file-then-rename, so a crashed run
never leaves a truncated output behind.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np
from screensum.corpus import CorpusError, load_corpus
from screensum.embedding import EmbeddingFileError, EmbeddingStore, write_embeddings

from .encoders import EncoderError, available_encoders, load_encoder

__all__ = ["ExportError", "ExportManifest", "export", "manifest_path"]


class ExportError(Exception):
    """Corpus content or encoder output that cannot be exported."""


@dataclass(frozen=True)
class ExportManifest:
    encoder_id: str
    dim: int
    corpus_hash: str
    sentence_count: int
    created_utc: str
    preprocessing: str = "verbatim"


def manifest_path(out_path):
    return f"{out_path}.manifest.json"


def _reject_empty_sentences(corpus, raw_text):
    # the loader accepts any string sentence; empty ones would write a
    # meaningless zero-information row, so refuse them with the file line
    line_numbers = [
        no for no, line in enumerate(raw_text.splitlines(), start=1) if line.strip()
    ]
    for episode, line_no in zip(corpus, line_numbers):
        for scene in episode.scenes:
            for k, sentence in enumerate(scene.sentences):
                if not sentence.strip():
                    raise ExportError(
                        f"line {line_no}: episode {episode.episode_id} scene "
                        f"{scene.scene_id}: sentence {k} is empty"
                    )


def export(corpus_path, encoder_id, out_path, batch_size=64):
    """Encode every sentence of the corpus at `corpus_path` to `out_path`.

    Returns the `ExportManifest`, which is also written as JSON next to the
    output file.  Raises `EncoderError` if the encoder cannot be loaded,
    `ExportError` on empty sentences or encoder output of the wrong shape,
    and `CorpusError` if the corpus file itself does not parse.
    """
    if batch_size < 1:
        raise ExportError(f"batch_size must be >= 1, got {batch_size}")
    encoder = load_encoder(encoder_id)

    with open(corpus_path, "rb") as fh:
        raw = fh.read()
    corpus = load_corpus(corpus_path)
    _reject_empty_sentences(corpus, raw.decode("utf-8"))

    sentences = []
    segments = []  # (store key, sentence count) per scene, in file order
    for episode in corpus:
        for scene in episode.scenes:
            segments.append(((episode.episode_id, scene.index), len(scene.sentences)))
            sentences.extend(scene.sentences)

    vectors = np.empty((len(sentences), encoder.dim), dtype=np.float32)
    for start in range(0, len(sentences), batch_size):
        batch = sentences[start : start + batch_size]
        out = np.asarray(encoder.encode(batch))
        if out.shape != (len(batch), encoder.dim):
            raise ExportError(
                f"encoder {encoder_id!r} declared dim {encoder.dim} but returned "
                f"shape {out.shape} for a batch of {len(batch)} sentences"
            )
        vectors[start : start + len(batch)] = out.astype(np.float32)

    rows = {}
    pos = 0
    for key, count in segments:
        rows[key] = vectors[pos : pos + count]
        pos += count
    write_embeddings(EmbeddingStore(dim=encoder.dim, rows=rows), corpus, out_path)

    manifest = ExportManifest(
        encoder_id=encoder_id,
        dim=encoder.dim,
        corpus_hash=hashlib.sha256(raw).hexdigest(),
        sentence_count=len(sentences),
        created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    tmp = f"{manifest_path(out_path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, manifest_path(out_path))
    return manifest


def run(argv=None):
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="encode a screensum corpus into its binary embedding file",
    )
    parser.add_argument("--corpus", required=True, metavar="FILE",
                        help="line-delimited corpus to encode")
    parser.add_argument("--encoder", required=True, metavar="ID",
                        help=f"encoder id ({', '.join(available_encoders())})")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="embedding file to write")
    parser.add_argument("--batch-size", type=int, default=64,
                        help="sentences per encoder call (default 64)")
    args = parser.parse_args(argv)
    try:
        manifest = export(args.corpus, args.encoder, args.out, args.batch_size)
    except (ExportError, EncoderError, CorpusError, EmbeddingFileError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {manifest.sentence_count} sentence vectors "
        f"(dim {manifest.dim}) -> {args.out}"
    )
    print(f"manifest -> {manifest_path(args.out)}")
    return 0


def main():
    sys.exit(run())
