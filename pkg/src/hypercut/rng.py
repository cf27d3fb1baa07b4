"""Reproducible, splittable random streams.

Every stochastic routine in the package draws from a SeededStream: a
(master_seed, stream_id) pair mapped onto a counter-based Philox generator.
Distinct stream ids give statistically independent substreams, and a stream's
output depends only on the pair, never on process state or worker count.
Substreams are derived by mixing integer path components into the stream id
with splitmix64, so `stream.substream(i).substream(j)` is a pure function of
(master_seed, stream_id, i, j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    # Standard splitmix64 finalizer; full 64-bit avalanche.
    x &= _MASK64
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class SeededStream:
    """Handle for one reproducible random substream.

    master_seed and stream_id are taken modulo 2^64 and together form the
    128-bit Philox key, so equal pairs give byte-identical draw sequences on
    any machine and any worker layout.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this substream."""
        key = np.array(
            [self.master_seed & _MASK64, self.stream_id & _MASK64],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, *path: int) -> "SeededStream":
        """Child stream addressed by a tuple of non-negative integers."""
        sid = self.stream_id & _MASK64
        for part in path:
            if part < 0:
                raise ValueError("substream path components must be >= 0")
            sid = _splitmix64(sid ^ _splitmix64(int(part)))
        return SeededStream(self.master_seed, sid)
