"""Seeded random streams with deterministic child derivation."""

from __future__ import annotations

import numpy as np


class Rng:
    """A 64-bit seeded stream (PCG64) that can spawn indexed child streams.

    ``Rng(seed).child(i)`` is a pure function of ``(seed, i)``, so trial ``i``
    of an experiment draws the same numbers whatever order trials run in.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._ss = seed
        else:
            self._ss = np.random.SeedSequence(int(seed))
        self.gen = np.random.Generator(np.random.PCG64(self._ss))

    @property
    def seed(self) -> int:
        return int(self._ss.entropy)

    def child(self, index: int) -> "Rng":
        ss = np.random.SeedSequence(
            self._ss.entropy, spawn_key=tuple(self._ss.spawn_key) + (int(index),)
        )
        return Rng(ss)

    def kernel_seed(self) -> int:
        """A 32-bit seed for compiled loops that use their own generator."""
        return int(self.gen.integers(0, 2**32 - 1))

    # thin conveniences over the underlying Generator
    def random(self, size=None):
        return self.gen.random(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def permutation(self, x):
        return self.gen.permutation(x)


def as_rng(rng: Rng | int | None) -> Rng:
    if isinstance(rng, Rng):
        return rng
    return Rng(0 if rng is None else rng)
