"""Seedable, splittable random streams.

Every stochastic routine takes either a ``numpy.random.Generator`` or an
integer seed; ``as_generator`` normalizes the two.  Named sub-streams are
derived from the seed and a label so that adding a new consumer does not
shift the numbers seen by existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("an explicit seed or Generator is required")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(rng))))


def named_stream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key])))


def split(rng, count: int) -> list[np.random.Generator]:
    """Independent child generators, deterministic given the parent state."""
    parent = as_generator(rng)
    seeds = parent.integers(0, 2**63 - 1, size=count)
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(s)))) for s in seeds]
