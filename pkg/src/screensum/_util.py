"""Small shared helpers: rounding, hashing, canonical JSON."""

from __future__ import annotations

import hashlib
import json
import math

__all__ = ["round_half_up", "sha256_file", "sha256_bytes", "canonical_json"]


def round_half_up(x):
    """Round to nearest integer with .5 going up (not banker's rounding).

    Selection sizes and position indices must round the same way
    everywhere, so every module routes through this helper.
    """
    return int(math.floor(x + 0.5))


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, fixed separators, newline at end."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
