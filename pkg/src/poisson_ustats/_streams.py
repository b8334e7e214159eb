"""Deterministic splittable random streams.

Every stochastic routine in the package derives its generator from a master
seed plus a structural path (replicate index, integral name, diagram index).
Streams for different paths never overlap, results do not depend on
execution order, and reruns with the same seed are bit-identical.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["seed_sequence", "spawn_rng", "stream_token"]


def _key_part(part) -> int:
    # spawn_key entries must be non-negative integers; hash names stably
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    value = int(part)
    if value < 0:
        raise ValueError(f"stream path parts must be non-negative, got {part!r}")
    return value


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the child stream at ``path`` under ``seed``."""
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key_part(p) for p in path))


def spawn_rng(seed: int, *path) -> np.random.Generator:
    """Generator for the child stream at ``path`` under ``seed``."""
    return np.random.default_rng(seed_sequence(seed, *path))


def stream_token(seed: int, *path) -> int:
    """Stable integer identifying a child stream (for provenance records)."""
    return int(seed_sequence(seed, *path).generate_state(1, np.uint64)[0])
