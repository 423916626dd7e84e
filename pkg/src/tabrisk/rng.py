"""Seeded random streams.

Every random draw in the package comes from a PCG64 generator. A pipeline
stage never shares a generator with another stage: it asks for a child
stream keyed by a stage name, e.g. ``stream(seed, "balance")``. The child is
``PCG64(SeedSequence(seed, spawn_key=(k,)))`` where ``k`` is the first eight
bytes (big-endian) of ``sha256(name)``. Nested names ("rf/fold3/tree17")
give independent streams, so order of evaluation never changes the draws.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def _key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= _U64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def _sequence(seed: int, name: str | None) -> np.random.SeedSequence:
    seed = check_seed(seed)
    if name is None:
        return np.random.SeedSequence(seed)
    return np.random.SeedSequence(seed, spawn_key=(_key(name),))


def stream(seed: int, name: str | None = None) -> np.random.Generator:
    """Generator for stage ``name`` under root ``seed`` (root stream if None)."""
    return np.random.Generator(np.random.PCG64(_sequence(seed, name)))


def derive_seed(seed: int, name: str) -> int:
    """A 64-bit seed for stage ``name``; ``stream(derive_seed(s, n))`` is stable."""
    lo, hi = _sequence(seed, name).generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)
