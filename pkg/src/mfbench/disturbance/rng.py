"""Portable seeding: FNV-1a 64-bit hashing and a splitmix64 stream.

splitmix64, with all arithmetic modulo 2**64::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Derived draws:

* ``uniform``: ``(next() >> 11) * 2**-53`` in [0, 1).
* ``index(n)``: mask ``next()`` down to the smallest all-ones mask covering
  ``n - 1`` and reject values >= n (no modulo bias).
* ``normals(k)``: Box-Muller over consecutive uniform pairs (u1, u2):
  ``r = sqrt(-2 ln(1 - u1))``, emitting ``r cos(2 pi u2)`` then
  ``r sin(2 pi u2)``; an odd ``k`` drops the final sine.
"""

from __future__ import annotations

import numpy as np

from mfbench.errors import ConfigError

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def derive_trial_seed(trial_id: str) -> int:
    """FNV-1a 64 of the UTF-8 bytes of a trial id."""
    if not trial_id:
        raise ConfigError("trial id must be non-empty")
    return fnv1a64(trial_id.encode("utf-8"))


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def block(self, n: int) -> np.ndarray:
        """The next ``n`` outputs as uint64, identical to n calls of next_u64."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(GAMMA)
        self.state = (self.state + n * GAMMA) & MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return (self.block(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def index(self, n: int) -> int:
        if n < 1:
            raise ConfigError("index range must be positive")
        mask = (1 << max(n - 1, 1).bit_length()) - 1
        while True:
            x = self.next_u64() & mask
            if x < n:
                return x

    def choice(self, options):
        return options[self.index(len(options))]

    def normals(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        out = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1).reshape(-1)
        return out[:n]
