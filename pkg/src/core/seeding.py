"""
Named random streams derived from one global seed.

Each component asks for its own stream by name (and optional index); the
stream is a counter-based Philox generator keyed by (seed, crc32(name),
index), so adding a new consumer never shifts the draws of existing ones.
"""

import zlib

import numpy as np


class SeedStreams:
    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seeds must be non-negative")
        self.seed = seed

    def generator(self, name: str, index: int = 0) -> np.random.Generator:
        key = (zlib.crc32(name.encode("utf-8")), index)
        sequence = np.random.SeedSequence(self.seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(sequence))
