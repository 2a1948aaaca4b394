"""Deterministic RNG derivation from structured seed specs."""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["entropy_tuple", "generator_for"]


def entropy_tuple(seed) -> tuple[int, ...]:
    """Flatten a seed spec (int, str, or nested tuples) into SeedSequence entropy."""
    if isinstance(seed, (tuple, list)):
        out: list[int] = []
        for part in seed:
            out.extend(entropy_tuple(part))
        return tuple(out)
    if isinstance(seed, str):
        return (zlib.crc32(seed.encode()),)
    return (int(seed) & 0xFFFFFFFFFFFFFFFF,)


def generator_for(seed) -> np.random.Generator:
    """Philox generator keyed by the flattened seed spec; bit-reproducible."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy_tuple(seed))))
