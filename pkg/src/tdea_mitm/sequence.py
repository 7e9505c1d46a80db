"""Seeded full-period orderings of the b-bit block space.

``APermutation(b, seed)`` maps index i -> a bijective mix of i over
Z/2^b (add, xorshift, odd multiply, all invertible mod 2^b), so walking
i = 0, 1, ..., 2^b - 1 visits every block exactly once.
"""

import random

import numpy as np

from .errors import InvalidInput


class APermutation:
    def __init__(self, b: int, seed=0):
        if not 1 <= b <= 64:
            raise InvalidInput(f"block width {b} outside 1..64")
        self.b = b
        self.seed = seed
        rng = random.Random(seed)
        self.mask = (1 << b) - 1
        self._add = rng.getrandbits(64) & self.mask
        self._xor = rng.getrandbits(64) & self.mask
        self._mul = [(rng.getrandbits(64) | 1) & self.mask or 1 for _ in range(2)]
        self._shifts = [max(1, b // 2), max(1, (b + 2) // 3), max(1, b // 2)]

    def __len__(self):
        return 1 << self.b

    def value(self, i: int) -> int:
        m = self.mask
        x = (i + self._add) & m
        x ^= x >> self._shifts[0]
        x = (x * self._mul[0]) & m
        x ^= x >> self._shifts[1]
        x = (x * self._mul[1]) & m
        x ^= x >> self._shifts[2]
        return x ^ self._xor

    def block(self, start: int, count: int) -> np.ndarray:
        """Values for indices start .. start+count-1 as a uint64 array."""
        m = np.uint64(self.mask)
        with np.errstate(over="ignore"):
            x = np.arange(start, start + count, dtype=np.uint64)
            x = (x + np.uint64(self._add)) & m
            x ^= x >> np.uint64(self._shifts[0])
            x = (x * np.uint64(self._mul[0])) & m
            x ^= x >> np.uint64(self._shifts[1])
            x = (x * np.uint64(self._mul[1])) & m
            x ^= x >> np.uint64(self._shifts[2])
        return x ^ np.uint64(self._xor)

    def __iter__(self):
        for i in range(1 << self.b):
            yield self.value(i)


def a_sequence(b: int, seed=0):
    """Iterator over all 2^b blocks in a seed-determined order."""
    return iter(APermutation(b, seed))
