"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream, counter)``.  Streams are
derived deterministically so that parallel ensembles can own disjoint
sequences without coordination.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngState:
    """Seed and stream index of a Philox counter-based generator.

    Parameters
    ----------
    seed : int
        64-bit user seed.
    stream : int
        64-bit stream index; distinct streams give independent sequences.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream", int(self.stream) & _MASK64)

    def generator(self, counter: int = 0) -> np.random.Generator:
        """Return a generator positioned at ``counter`` blocks into the stream."""
        bitgen = np.random.Philox(key=self.seed | (self.stream << 64))
        if counter:
            bitgen.advance(counter)
        return np.random.Generator(bitgen)

    def child(self, *path: int) -> "RngState":
        """Derive a sub-stream labelled by an integer path."""
        ss = np.random.SeedSequence(entropy=[self.stream, *[int(p) & _MASK64 for p in path]])
        stream = int(ss.generate_state(2, dtype=np.uint64)[0])
        return RngState(self.seed, stream)


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngState``, a ``Generator`` or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    if rng is None:
        raise TypeError("an explicit rng is required for reproducibility")
    return RngState(int(rng)).generator()


def as_state(rng) -> RngState:
    """Coerce an int seed or ``RngState`` to ``RngState``."""
    if isinstance(rng, RngState):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngState(int(rng))
    raise TypeError(f"expected RngState or int seed, got {type(rng).__name__}")
