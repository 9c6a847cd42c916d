"""Counter-based random streams keyed by (master seed, depth, replicate)."""
from __future__ import annotations

import numpy as np


def stream(master: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for ``key`` under ``master``.

    The stream depends only on ``(master, key)``, never on scheduling.
    """
    if master < 0 or any(k < 0 for k in key):
        raise ValueError("seeds and keys must be nonnegative")
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
