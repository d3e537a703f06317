"""Seeded randomness.

Every random decision in the generator is drawn from a single
``numpy.random.Generator`` backed by PCG64 (O'Neill's permuted congruential
generator, 128-bit state, 64-bit output). PCG64's bit stream is frozen by
NumPy's stream-compatibility policy, so a seed reproduces the same data on
any machine.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def new_rng(seed: int) -> np.random.Generator:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if seed < 0 or seed > MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))
