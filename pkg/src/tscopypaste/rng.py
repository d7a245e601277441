"""Deterministic random streams keyed by (seed, image, duplicate, stage).

Every stream is a PCG64 generator seeded from a ``numpy.random.SeedSequence``
whose spawn key is the derivation path, so a stream depends only on its path
and never on which worker consumes it or in what order. Each draw method
consumes exactly one 53-bit uniform double.
"""
import math
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stage_code(tag):
    return zlib.crc32(tag.encode("utf-8"))


class RngStream:
    def __init__(self, seed_sequence, path=()):
        self.path = tuple(path)
        self._gen = np.random.Generator(np.random.PCG64(seed_sequence))
        self.draws = 0

    @classmethod
    def from_seed(cls, seed):
        return cls(np.random.SeedSequence(seed & _MASK64), (seed,))

    def random(self):
        """Uniform float in [0, 1)."""
        self.draws += 1
        return self._gen.random()

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.random()

    def randint(self, lo, hi):
        """Uniform integer in [lo, hi], both inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        k = lo + math.floor(self.random() * (hi - lo + 1))
        return min(k, hi)

    def bernoulli(self, p):
        return self.random() < p

    def __repr__(self):
        return f"RngStream(path={self.path}, draws={self.draws})"


def derive_stream(root_seed, image_id, duplicate_index, stage_tag):
    """Independent stream for one (image, duplicate, stage) unit of work."""
    key = (image_id & _MASK64, duplicate_index & _MASK64, stage_code(stage_tag))
    ss = np.random.SeedSequence(root_seed & _MASK64, spawn_key=key)
    return RngStream(ss, (root_seed, image_id, duplicate_index, stage_tag))
