"""SplitMix64 pseudo-random generator.

Counter based, so a block of ``n`` outputs is produced in one vectorised
numpy pass. Output is bit-identical on every platform for the integer and
uniform streams; normal deviates go through libm ``log``/``cos``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix64(value: int) -> int:
    """Finaliser of SplitMix64 applied to a single integer."""
    return int(_mix(np.array([value & MASK64], dtype=np.uint64))[0])


def derive_seed(seed: int, stream: int) -> int:
    """Independent 64-bit seed for sub-stream ``stream`` of ``seed``."""
    return mix64((seed & MASK64) ^ mix64((stream * GAMMA + 0x632BE59BD9B4E019) & MASK64))


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._state = self.seed

    @classmethod
    def derived(cls, seed: int, stream: int) -> SplitMix64:
        return cls(derive_seed(seed, stream))

    def next_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        states = np.uint64(self._state) + steps * np.uint64(GAMMA)
        self._state = (self._state + n * GAMMA) & MASK64
        return _mix(states)

    def random(self, n: int) -> np.ndarray:
        """Uniform doubles in [0, 1) from the top 53 bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def normal(self, n: int) -> np.ndarray:
        """Standard normal deviates via Box-Muller (cosine branch only)."""
        u = self.random(2 * n)
        radius = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        return radius * np.cos(2.0 * np.pi * u[1::2])

    def integers(self, high: int, n: int) -> np.ndarray:
        """Integers uniform on [0, high)."""
        if high <= 0:
            raise ValueError("high must be positive")
        out = np.floor(self.random(n) * high).astype(np.int64)
        return np.minimum(out, high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``."""
        return self.sample(n, n)

    def sample(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)`` (partial Fisher-Yates)."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} distinct items from {n}")
        perm = np.arange(n, dtype=np.int64)
        u = self.random(k)
        for i in range(k):
            j = i + min(int(u[i] * (n - i)), n - i - 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm[:k].copy()
