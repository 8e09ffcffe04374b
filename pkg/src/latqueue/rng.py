"""Seed handling: master seed -> replication seeds -> named streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STREAMS = ("arrivals", "scheduling", "routing")
_TINY = 2.0**-60


def replication_seeds(master: int, count: int) -> list[int]:
    """Fixed per-replication seeds derived from the master seed."""
    ss = np.random.SeedSequence(int(master))
    return [int(s) for s in ss.generate_state(count, np.uint64)]


@dataclass
class Streams:
    """Three independent generators for one replication.

    Runs that share a seed share every stream, which is what the monotone
    coupling check relies on.
    """

    arrivals: np.random.Generator
    scheduling: np.random.Generator
    routing: np.random.Generator
    seed: int

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
        gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
        return cls(*gens, seed=int(seed))


def open_uniforms(gen: np.random.Generator, shape) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    return np.maximum(gen.random(shape), _TINY)
