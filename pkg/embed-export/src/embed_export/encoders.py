"""Sentence encoders, pluggable by identifier string.

Built in:

- ``hash-<dim>``  deterministic feature-hashing encoder for any dim >= 1.
  Needs no model download, so it is the default for tests and fixtures.
- ``use-512``     the well-known pretrained 512-dim universal sentence
  encoder, loaded through tensorflow_hub when that runtime is installed.

Anything else can be plugged in with `register_encoder`; an encoder is an
object with a ``dim`` attribute and an ``encode(sentences) -> (n, dim)
float32 array`` method.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

__all__ = [
    "EncoderError",
    "HashEncoder",
    "available_encoders",
    "load_encoder",
    "register_encoder",
]

_WORD = re.compile(r"[a-z0-9']+")
_HASH_ID = re.compile(r"^hash-([0-9]+)$")
_USE_URL = "https://tfhub.dev/google/universal-sentence-encoder/4"

_registry = {}


class EncoderError(Exception):
    """Unknown encoder id, or an encoder that cannot be loaded."""


class HashEncoder:
    """Feature hashing over lowercased word tokens, L2-normalized rows.

    Pure function of the sentence text: no vocabulary, no state, identical
    output for identical input on every run and at every batch size.
    Sentences with no word tokens map to the zero vector.
    """

    def __init__(self, dim):
        if dim < 1:
            raise EncoderError(f"hash encoder dim must be >= 1, got {dim}")
        self.encoder_id = f"hash-{dim}"
        self.dim = dim

    def _row(self, sentence):
        row = np.zeros(self.dim, dtype=np.float64)
        for token in _WORD.findall(sentence.lower()):
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            sign = 1.0 if value & 1 else -1.0
            row[(value >> 1) % self.dim] += sign
        norm = np.linalg.norm(row)
        if norm > 0.0:
            row /= norm
        return row

    def encode(self, sentences):
        return np.stack(
            [self._row(s) for s in sentences], axis=0
        ).astype(np.float32)


class _UniversalSentenceEncoder:
    def __init__(self):
        try:
            import tensorflow_hub  # noqa: F401  (optional heavyweight runtime)
        except ImportError:
            raise EncoderError(
                "encoder 'use-512' needs the tensorflow_hub runtime; "
                "install tensorflow and tensorflow_hub, or pick a "
                "hash-<dim> encoder"
            ) from None
        self.encoder_id = "use-512"
        self.dim = 512
        self._model = tensorflow_hub.load(_USE_URL)

    def encode(self, sentences):
        return np.asarray(self._model(list(sentences)), dtype=np.float32)


def register_encoder(encoder_id, factory):
    """Register a zero-argument factory for a custom encoder id."""
    _registry[encoder_id] = factory


def available_encoders():
    builtin = ("hash-<dim>", "use-512")
    return builtin + tuple(sorted(_registry))


def load_encoder(encoder_id):
    match = _HASH_ID.match(encoder_id)
    if match:
        return HashEncoder(int(match.group(1)))
    if encoder_id == "use-512":
        return _UniversalSentenceEncoder()
    if encoder_id in _registry:
        return _registry[encoder_id]()
    raise EncoderError(
        f"unknown encoder id {encoder_id!r}; "
        f"available: {', '.join(available_encoders())}"
    )
