"""Named random streams.

Every stream is a PCG64 generator seeded from ``SeedSequence(seed,
spawn_key=key)``. Keys are tuples of non-negative integers; strings in a
key (participant ids, purposes such as ``"sample"`` or a classifier name)
are mapped to integers by CRC-32, so a stream is fully determined by the
user seed and its key, independent of execution order or platform.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream_key(*parts) -> tuple:
    return tuple(_key_part(p) for p in parts)


def make_rng(seed: int, *key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=stream_key(*key))))


def stream_seed(seed: int, *key) -> int:
    """A 64-bit integer seed for code that takes plain integer seeds."""
    state = np.random.SeedSequence(seed, spawn_key=stream_key(*key)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
