"""Counter-based hashing RNG.

Each point encoding gets its own 64-bit word derived from ``(key, encoding)``,
so inclusion decisions do not depend on iteration order or on how the point
range is split across workers.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_key(*parts: int) -> int:
    """Fold integers into one 64-bit key (splitmix64 chaining)."""
    acc = np.array([0x243F6A8885A308D3], dtype=np.uint64)
    with np.errstate(over="ignore"):
        for part in parts:
            acc = _mix(acc ^ np.uint64(int(part) & _MASK64) + _GOLDEN)
    return int(acc[0])


def hash_words(key: int, start: int, stop: int) -> np.ndarray:
    """64-bit hash words for encodings ``start..stop-1`` under ``key``."""
    idx = np.arange(start, stop, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(idx * _GOLDEN + np.uint64(key & _MASK64))


def bernoulli_mask(key: int, start: int, stop: int, p: Fraction) -> np.ndarray:
    """Inclusion flags with P[flag] = floor(p * 2^64) / 2^64 for each encoding."""
    if p >= 1:
        return np.ones(stop - start, dtype=bool)
    if p <= 0:
        return np.zeros(stop - start, dtype=bool)
    threshold = (p.numerator << 64) // p.denominator
    return hash_words(key, start, stop) < np.uint64(threshold)
