"""Seeded random streams.

Every entry point takes an explicit seed.  Independent phases of a run
(simulation, assignment sweeps, MH refreshes, concentration updates,
analytics) draw from separate Philox substreams derived from that one seed,
so extra draws in one phase never perturb another.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "simulate": 1,
    "init": 2,
    "sweep": 3,
    "mh": 4,
    "nu": 5,
    "analytics": 6,
    "heldout": 7,
    "partition": 8,
}


def rng_stream(seed: int, stream: str | None = None) -> np.random.Generator:
    """Counter-based generator for ``(seed, stream)``; identical seeds give identical streams."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    key = () if stream is None else (STREAMS[stream],)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return rng_stream(int(rng))
    raise TypeError(f"expected a numpy Generator or an integer seed, got {type(rng).__name__}")
