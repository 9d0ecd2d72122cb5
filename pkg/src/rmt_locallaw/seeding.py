"""Deterministic seed derivation.

Every random draw in the package comes from a counter-based Philox generator
whose key is derived from a master seed plus a tuple of context labels
(indices, id strings). Derivation is stateless, so jobs can be scheduled in
any order and still reproduce byte-identical output.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step; the standard 64-bit mix used for seed folding."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fold(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"cannot fold {type(part).__name__} into a seed")


def derive_seed(seed: int, *parts) -> int:
    """Derive a child seed from a master seed and context labels."""
    s = splitmix64(int(seed) & _MASK64)
    for part in parts:
        s = splitmix64(s ^ _fold(part))
    return s


def generator(seed: int, *parts) -> np.random.Generator:
    """Philox generator keyed by derive_seed(seed, *parts)."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *parts)))
