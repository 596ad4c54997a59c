"""Reproducible, splittable random streams.

Every chain owns a :class:`RngStream` identified by ``(seed, stream path)``.
The stream key is derived with :class:`numpy.random.SeedSequence` and drives
a Philox4x64 counter-based generator, so a given ``(seed, stream)`` pair
yields the same numbers on every platform and regardless of how many
workers run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: tuple = ()
    algorithm: str = "philox4x64"

    def __post_init__(self):
        if int(self.seed) < 0:
            raise ValueError("seed must be a nonnegative integer")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))

    def key(self) -> np.ndarray:
        return np.random.SeedSequence(self.seed, spawn_key=self.stream).generate_state(2, np.uint64)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))

    def spawn(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.stream + (int(i),), self.algorithm)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream, or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")
