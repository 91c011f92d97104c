"""Seeded random streams.

Every stochastic step draws from numpy's Philox-4x64 counter-based bit
generator keyed by an integer seed, so a (seed, algorithm) pair pins the
stream on every platform numpy supports.
"""
import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(int(seed)))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent integer seeds from ``seed``."""
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in ss.spawn(n)]
