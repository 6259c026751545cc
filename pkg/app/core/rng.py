# app/core/rng.py
"""
Seeded random sources.

Keys are derived with SplitMix64 (Steele, Lea & Flood 2014; constants
0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9, 0x94D049BB133111EB) and every source
draws from numpy's counter-based Philox4x64-10 bit generator keyed with the
derived value. Both are fully specified integer algorithms, so a given seed
gives the same stream on every platform for a pinned numpy.
"""
from typing import Optional, Sequence, Union

import numpy as np

from app.core.exceptions import DimensionMismatchError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_2) & MASK64
    return z ^ (z >> 31)


class RandomSource:
    """A seeded stream of random draws.

    Child sources are keyed by (seed, stream index) through SplitMix64, so
    ``RandomSource(s).child(3)`` is the same stream in every process.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._generator: Optional[np.random.Generator] = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            self._generator = np.random.Generator(np.random.Philox(key=splitmix64(self.seed)))
        return self._generator

    def child(self, *streams: int) -> "RandomSource":
        seed = self.seed
        for stream in streams:
            seed = splitmix64(seed ^ splitmix64((int(stream) + 1) & MASK64))
        return RandomSource(seed)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Union[int, Sequence[int], None] = None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Union[int, Sequence[int], None] = None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low: int, high: int, size: Union[int, Sequence[int], None] = None):
        return self.generator.integers(low, high, size)

    def random(self, size: Union[int, Sequence[int], None] = None):
        return self.generator.random(size)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"


def run_seed(base_seed: int, run_index: int) -> int:
    return (int(base_seed) ^ int(run_index)) & MASK64


def sample_unit_sphere(rng: RandomSource, d: int) -> np.ndarray:
    """Uniform draw from the unit sphere in R^d (normalised Gaussian)."""
    if d < 1:
        raise DimensionMismatchError(f"Sphere dimension must be at least 1, got {d}")
    while True:
        g = rng.normal(size=d)
        norm = float(np.linalg.norm(g))
        if norm > 0.0:
            return g / norm
