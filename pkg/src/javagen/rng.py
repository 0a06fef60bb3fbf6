"""Portable 64-bit xorshift* generator with splittable seeding.

The stream is defined entirely by integer arithmetic so another language can
reproduce it bit for bit:

* seeding: ``state = splitmix64(seed)``; a zero state is replaced by
  ``0x9E3779B97F4A7C15``;
* step: ``x ^= x >> 12; x ^= (x << 25) mod 2**64; x ^= x >> 27``;
  output ``(x * 0x2545F4914F6CDD1D) mod 2**64``;
* splitting: ``derive_seed(seed, *keys)`` folds each key through splitmix64.
"""

from __future__ import annotations

import math
from typing import List, MutableSequence, Sequence

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MULT = 0x2545F4914F6CDD1D


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    h = splitmix64(seed & MASK64)
    for k in keys:
        h = splitmix64(h ^ (k & MASK64))
    return h


class XorShift64Star:
    def __init__(self, seed: int = 0):
        state = splitmix64(seed & MASK64)
        self.state = state or _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & MASK64

    def split(self, key: int) -> "XorShift64Star":
        return XorShift64Star(derive_seed(self.next_u64(), key))

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        # reject the low 2**64 mod n values to remove modulo bias
        threshold = (1 << 64) % n
        while True:
            x = self.next_u64()
            if x >= threshold:
                return x % n

    def poisson(self, lam: float) -> int:
        """Knuth's multiplication method; fine for the small means used here."""
        limit = math.exp(-lam)
        k = 0
        p = 1.0
        while True:
            p *= self.random()
            if p <= limit:
                return k
            k += 1

    def shuffle(self, items: MutableSequence) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_sorted(self, population: int, k: int) -> List[int]:
        """k distinct values from range(population), ascending."""
        if k > population:
            raise ValueError("sample larger than population")
        chosen: dict = {}
        out = []
        # partial Fisher-Yates over a virtual array
        for i in range(k):
            j = i + self.randbelow(population - i)
            vi = chosen.get(i, i)
            vj = chosen.get(j, j)
            chosen[j] = vi
            out.append(vj)
        return sorted(out)

    def permutation(self, n: int) -> List[int]:
        out = list(range(n))
        self.shuffle(out)
        return out


def take(rng: XorShift64Star, n: int) -> Sequence[int]:
    return [rng.next_u64() for _ in range(n)]
