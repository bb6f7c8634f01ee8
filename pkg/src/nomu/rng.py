"""Seeded, portable random streams.

Every random draw in the package comes from a ``numpy.random.Generator`` backed
by PCG64 and keyed by ``(seed, *labels)``.  Labels are hashed with BLAKE2b so
the resulting stream depends only on their text, never on call order or on
Python's per-process hash salt.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label) -> int:
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``seed`` and a tuple of stream labels."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_label_words(lbl) for lbl in labels]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def derive_seed(seed: int, *labels) -> int:
    """A 63-bit integer seed derived from ``seed`` and labels."""
    return int(stream(seed, "derive", *labels).integers(0, 2**63 - 1))
