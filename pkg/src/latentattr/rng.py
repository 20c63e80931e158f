"""SplitMix64 generator with Fisher-Yates shuffling.

Every sampling step in the package draws from this generator so that runs are
reproducible bit-for-bit across platforms and implementations.
"""

from __future__ import annotations

from typing import MutableSequence, Sequence

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 output finalizer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *tags: int) -> int:
    """Derive an independent sub-stream seed from ``seed`` and integer tags."""
    s = seed & _MASK
    for tag in tags:
        s = mix64(s ^ mix64((tag + 1) * _GOLDEN))
    return s


class SplitMix64:
    def __init__(self, seed: int = 0):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return mix64(self.state)

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return low + (high - low) * u

    def shuffle(self, items: MutableSequence) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx

    def sample(self, population: Sequence, k: int) -> list:
        """``k`` items drawn uniformly without replacement (prefix of a shuffle)."""
        if k > len(population):
            raise ValueError(f"cannot draw {k} items from {len(population)}")
        pool = list(population)
        self.shuffle(pool)
        return pool[:k]
