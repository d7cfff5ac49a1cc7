"""Counter-based random streams keyed by (seed, trial, substream).

Each key maps to its own Philox generator, so a trial draws the same numbers
whichever worker runs it and in whatever order.
"""

from __future__ import annotations

import numpy as np

# substream labels used across the package
DATA = 0
CANDIDATES = 1
NOISE = 2
ORACLE = 3
CODE = 4
REFERENCE = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError("seed and stream keys must be non-negative integers")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def trial_stream(seed: int, trial: int, substream: int = DATA) -> np.random.Generator:
    return stream(seed, trial, substream)
