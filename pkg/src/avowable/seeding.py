"""Deterministic seed derivation.

Every random stream in a run is keyed off the run seed plus a tag path, so
sub-streams never share state and never depend on call order elsewhere.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *tags: object) -> int:
    """Stable 64-bit child seed for ``(seed, *tags)``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "big")


def make_rng(seed: int, *tags: object) -> np.random.Generator:
    # Philox is counter-based: the stream is a pure function of the key.
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *tags)))
