"""Deterministic randomness with documented stream splitting.

All stochastic choices in the toolkit come from NumPy's PCG64 generator.
Independent streams are derived from one user-facing 64-bit seed by mixing
in purpose tags: every tag is hashed with FNV-1a and the running state is
scrambled with a SplitMix64 step, so

    subseed(seed, "dataset1") != subseed(seed, "dataset2-proj")

and the full scheme is reproducible from the seed alone, across platforms.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def subseed(seed: int, *tags) -> int:
    """Derive a 64-bit stream seed from `seed` and a tag sequence."""
    h = seed & _MASK64
    for tag in tags:
        h = _splitmix64(h ^ _fnv1a64(str(tag).encode("utf-8")))
    return _splitmix64(h)


def substream(seed: int, *tags) -> np.random.Generator:
    """PCG64 generator on the stream named by `tags`."""
    return np.random.Generator(np.random.PCG64(subseed(seed, *tags)))
