"""Reproducible random-number streams.

Every stochastic stage draws from its own counter-based Philox stream whose
key is derived from ``(master_seed, *tags)``, where tags are small integers
or short strings (replicate indices, stage names). Streams are therefore
independent of execution order, which keeps parallel Monte Carlo runs
bitwise reproducible.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError(f"stream tags must be nonnegative, got {tag}")
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def stream(master_seed: int, *tags) -> np.random.Generator:
    """Return a Philox generator keyed by ``(master_seed, *tags)``."""
    key = tuple(_tag_to_int(t) for t in tags)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def as_generator(seed_or_rng) -> np.random.Generator:
    """Accept either a seed (int) or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(int(seed_or_rng))
