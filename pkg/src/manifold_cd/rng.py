"""Deterministic random generator used by every component of the package.

All randomness (data generation, index selection, shuffles) flows through
SplitMix64, a counter-based 64-bit generator with fixed published constants,
so that identical seeds reproduce identical runs bit for bit, independent of
platform, numpy version, or thread count.

Algorithm: state advances by the golden-gamma increment 0x9E3779B97F4A7C15;
the output is a two-round xor-multiply finalizer of the new state
(multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB).  Uniform doubles
take the top 53 bits; integers in a range use threshold rejection (no modulo
bias); normals use Box-Muller.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Counter-based 64-bit generator with a published, fixed algorithm."""

    def __init__(self, seed: int):
        self._state = seed & _MASK
        self._cached_normal: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), sampled by rejection."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        limit = ((1 << 64) // n) * n
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def normal(self) -> float:
        """Standard normal via Box-Muller; the second of each pair is cached."""
        if self._cached_normal is not None:
            z, self._cached_normal = self._cached_normal, None
            return z
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # in (0, 1], log-safe
        u2 = (self.next_u64() >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        a = 2.0 * math.pi * u2
        self._cached_normal = r * math.sin(a)
        return r * math.cos(a)

    def gaussian(self, rows: int, cols: int) -> np.ndarray:
        """Row-major matrix of independent standard normals."""
        out = np.empty((rows, cols), dtype=np.float64)
        flat = out.reshape(-1)
        for k in range(flat.size):
            flat[k] = self.normal()
        if not np.isfinite(out).all():
            raise FloatingPointError("generator produced a non-finite entry")
        return out

    def normal_vector(self, n: int) -> np.ndarray:
        return self.gaussian(n, 1).reshape(-1)

    def uniform_vector(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        for k in range(n):
            out[k] = self.uniform()
        return out

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n)."""
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
