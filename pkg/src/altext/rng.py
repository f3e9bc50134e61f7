"""Deterministic, serializable random number generation.

The generator is xoshiro256** 1.0 (Blackman and Vigna), seeded through
splitmix64. It is implemented on plain 64-bit integer state so the stream is
identical on every platform and the four state words round-trip through JSON,
which session save/resume relies on. Bulk numeric initialization elsewhere in
the package (weight matrices, random projections) goes through numpy
generators seeded from this stream; all sampling *decisions* (shuffles,
subsamples, weighted draws) consume this stream directly.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


class Rng:
    """xoshiro256** stream with JSON-serializable state.

    Identical seeds produce identical streams; `state` / `set_state` capture
    and restore the exact position in the stream.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        x = int(seed) & _MASK64
        x, self._s0 = _splitmix64(x)
        x, self._s1 = _splitmix64(x)
        x, self._s2 = _splitmix64(x)
        x, self._s3 = _splitmix64(x)

    # -- core stream ---------------------------------------------------

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        t = (s1 * 5) & _MASK64
        result = ((t << 7 | t >> 57) & _MASK64) * 9 & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << 45 | s3 >> 19) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), bias-free via rejection."""
        if n <= 0:
            raise ValueError("randint requires n >= 1")
        limit = ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    # -- derived draws -------------------------------------------------

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        items = list(range(n))
        self.shuffle(items)
        return items

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), uniform without replacement."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        items = list(range(n))
        for i in range(k):
            j = i + self.randint(n - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]

    def weighted_index(self, weights: np.ndarray) -> int:
        """One index drawn with probability proportional to `weights`.

        Weights must be non-negative with a positive sum; zero-weight entries
        are never returned. Consumes exactly one `random()` draw.
        """
        cumulative = np.cumsum(np.asarray(weights, dtype=np.float64))
        total = float(cumulative[-1])
        if not total > 0.0:
            raise ValueError("weighted_index requires positive total weight")
        r = self.random() * total
        idx = int(np.searchsorted(cumulative, r, side="right"))
        return min(idx, len(cumulative) - 1)

    def normal(self) -> float:
        """Standard normal via Box-Muller (no cached spare, keeps state flat)."""
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def spawn_seed(self) -> int:
        """Fresh 64-bit seed for a child generator or numpy bulk init."""
        return self.next_u64()

    # -- state ---------------------------------------------------------

    @property
    def state(self) -> list[int]:
        return [self._s0, self._s1, self._s2, self._s3]

    def set_state(self, state: Sequence[int]) -> None:
        if len(state) != 4:
            raise ValueError("state must hold exactly 4 words")
        self._s0, self._s1, self._s2, self._s3 = (int(w) & _MASK64 for w in state)

    def clone(self) -> "Rng":
        other = Rng(0)
        other.set_state(self.state)
        return other
