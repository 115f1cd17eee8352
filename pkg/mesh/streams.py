"""Keyed random streams for the simulator."""

import enum

import numpy as np


class Purpose(enum.IntEnum):
    TRAFFIC = 1
    JITTER = 2
    SCAN = 3


class RandomStreams:
    """
    Derives an independent generator for every (purpose, key) pair.

    Streams depend only on the seed and the key, never on the order in which
    they are requested, so a second traffic flow leaves the first flow's draws
    untouched.
    """

    def __init__(self, seed):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)

    def generator(self, purpose, *key):
        sequence = np.random.SeedSequence(self.seed, spawn_key=(int(purpose), *map(int, key)))
        return np.random.Generator(np.random.PCG64(sequence))

    def traffic(self, flow_index):
        return self.generator(Purpose.TRAFFIC, flow_index)

    def jitter(self, node_index, src, seq):
        return self.generator(Purpose.JITTER, node_index, src, seq)

    def scan(self, node_index, src, seq):
        return self.generator(Purpose.SCAN, node_index, src, seq)
