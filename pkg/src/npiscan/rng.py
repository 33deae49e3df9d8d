"""Seed derivation for reproducible, parallel-safe random streams.

All randomness in the package flows from one root seed. Independent streams
(per sample, per column, per epoch, ...) are derived by hashing string/int
keys into a spawn key, so regenerating any single stream never requires
replaying the others.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    if isinstance(key, str):
        digest = hashlib.blake2s(key.encode("utf-8"), digest_size=4).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"rng stream keys must be int or str, got {type(key)!r}")


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Derive an independent PCG64 stream from (seed, *keys)."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(_key_to_int(k) for k in keys),
    )
    return np.random.Generator(np.random.PCG64(ss))
