"""Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by a ``SeedSequence``
built from integer keys, e.g. ``(master_seed, agent, purpose, round)``. SeedSequence
hashes the whole key tuple, so streams with different keys are independent and the
mapping is identical on every platform.
"""

from __future__ import annotations

import numpy as np

# purpose tags for derived streams
DATA = 0
INIT = 1
TRAIN = 2
FLIP = 3
SHARED = 4


def make_rng(*keys: int) -> np.random.Generator:
    ints = [int(k) for k in keys]
    if any(k < 0 for k in ints):
        raise ValueError("seed keys must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(ints)))


def derive_seed(*keys: int) -> int:
    """A non-negative 63-bit integer seed derived from the key tuple."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)
    return int(state[0]) >> 1
