"""Seeded pseudo-random numbers for every stochastic piece of the toolkit.

A single 64-bit SplitMix64 stream per generator; Gaussians come from
Box-Muller pairs. The k-th raw word is a pure function of (seed, k), so
draws vectorise with numpy uint64 arithmetic and repeated runs are
bit-identical.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class Rng:
    """SplitMix64 generator with vectorised uniform and Gaussian draws."""

    def __init__(self, seed: int):
        self._seed = int(seed) & _MASK
        self._count = 0

    def _raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words as uint64."""
        if n < 0:
            raise ValueError("draw count must be nonnegative")
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            z = np.uint64(self._seed) + idx * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        return z

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1), 53 bits of entropy each."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) / float(1 << 53)

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard Gaussians via Box-Muller."""
        pairs = (n + 1) // 2
        u = self._raw(2 * pairs)
        # radius uniform on (0, 1] so the log stays finite
        u1 = ((u[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) / float(1 << 53)
        u2 = (u[pairs:] >> np.uint64(11)).astype(np.float64) / float(1 << 53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normal(rows * cols).reshape(rows, cols)

    def uniform_symmetric(self, n: int, half_width: float) -> np.ndarray:
        """``n`` doubles uniform on [-half_width, half_width)."""
        return half_width * (2.0 * self.uniform(n) - 1.0)
