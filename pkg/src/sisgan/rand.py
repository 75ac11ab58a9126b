"""Deterministic RNG streams.

Every randomized operation in the package draws from a counter-based
Philox generator keyed by a seed plus an integer key path, so results
are independent of execution order and identical across runs.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the Philox substream identified by ``(seed, *key)``.

    The same ``(seed, key)`` pair always yields an identical stream;
    distinct pairs yield statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Deterministically derive a fresh 32-bit seed from (seed, key)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
