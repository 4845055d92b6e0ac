"""Reproducible counter-based random streams.

Every stochastic routine in the package draws from an ``RngStream``, a thin
wrapper over numpy's Philox generator keyed by ``(seed, stream_id)``.  Distinct
stream ids give statistically independent streams, so parallel replications
can each own a stream without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RngStream", "substream_id"]

_MASK64 = (1 << 64) - 1


def substream_id(*parts: int) -> int:
    """Mix integer labels into a single 64-bit stream id.

    Uses splitmix64-style mixing so that e.g. (example, q, replication)
    triples map to well-separated ids.
    """
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = (h ^ (int(p) & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        h = (h ^ (h >> 27)) * 0x94D049BB133111EB & _MASK64
        h ^= h >> 31
    return h


@dataclass
class RngStream:
    """A seedable stream of random draws.

    Identical ``(seed, stream_id)`` pairs reproduce identical draw sequences;
    distinct stream ids are independent.  A stream must not be shared between
    concurrent workers.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64],
                       dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def spawn(self, *parts: int) -> "RngStream":
        """Derive an independent child stream labelled by ``parts``."""
        return RngStream(self.seed, substream_id(self.stream_id, *parts))
