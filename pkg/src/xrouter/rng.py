"""Deterministic hash-stream randomness shared by the simulated pool.

Every stochastic choice in the engine is a pure function of named string/int
parts fed through SHA-256 (truncated to 64 bits). This keeps runs bit-stable
across processes and platforms and lets external clients re-derive seeds
(SHA-256 is available everywhere, unlike parameterized BLAKE2 digests).
"""

from __future__ import annotations

import hashlib
from fractions import Fraction

_H_MAX = 2**64


def stable_hash64(*parts: object) -> int:
    """64-bit hash of length-prefixed string renderings of the parts."""
    h = hashlib.sha256()
    for part in parts:
        encoded = str(part).encode("utf-8")
        h.update(len(encoded).to_bytes(4, "big"))
        h.update(encoded)
    return int.from_bytes(h.digest()[:8], "big")


def unit_float(*parts: object) -> float:
    """Deterministic draw in [0, 1)."""
    return stable_hash64(*parts) / _H_MAX


def unit_fraction(*parts: object) -> Fraction:
    """Exact deterministic draw in [0, 1); use when rounding must be exact."""
    return Fraction(stable_hash64(*parts), _H_MAX)


def int_in_range(lo: int, hi: int, *parts: object) -> int:
    """Deterministic draw from the inclusive range [lo, hi]."""
    if hi < lo:
        raise ValueError(f"empty range [{lo}, {hi}]")
    return lo + stable_hash64(*parts) % (hi - lo + 1)


def derive_seed(*parts: object) -> int:
    """Derive a JSON-safe sub-seed (fits in 31 bits) from named parts."""
    return stable_hash64("derive-seed", *parts) % (2**31)
