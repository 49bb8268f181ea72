"""Deterministic seed derivation and random generator construction.

All sampling in the toolkit flows through Philox, a counter-based generator
whose streams reproduce across platforms and processes. Sub-seeds for
per-topic or per-stage work are derived by hashing, so results do not depend
on iteration order and distinct stages never share a stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(base_seed: int, *parts: object) -> int:
    """Derive a stable 64-bit sub-seed from a base seed and context labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(base_seed)).encode("ascii"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "big")


def make_rng(seed: int) -> np.random.Generator:
    """Philox-backed generator for the given seed."""
    return np.random.Generator(np.random.Philox(seed))
