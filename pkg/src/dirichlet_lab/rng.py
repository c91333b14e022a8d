"""Counter-based random substreams.

Every consumer keys a Philox generator by (seed, stream); results are then
reproducible independently of how the streams are scheduled across threads,
and accumulators can be merged deterministically in stream order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]

_MASK64 = (1 << 64) - 1


def substream(seed: int, stream: int) -> np.random.Generator:
    """Generator for the given (seed, stream) pair."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
