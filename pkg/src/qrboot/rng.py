"""Counter-based random substreams.

Every random draw in the package comes from a Philox generator keyed by a
master seed plus a tuple of stream identifiers, so nested Monte Carlo layers
(outer paths, contamination, inner resamples, error bars) never share a
stream and any single layer can be regenerated in isolation.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive_seed", "substream"]

_MASK64 = (1 << 64) - 1


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    raise TypeError(f"stream id must be int or str, got {type(part).__name__}")


def _sequence(seed: int, keys) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(_key(k) for k in keys))


def substream(seed: int, *keys) -> np.random.Generator:
    """Return an independent generator for ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(_sequence(seed, keys)))


def derive_seed(seed: int, *keys) -> int:
    """Derive a child 64-bit seed, deterministic in ``(seed, *keys)``."""
    lo, hi = _sequence(seed, keys).generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)
