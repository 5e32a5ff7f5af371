"""Deterministic seed-stream derivation.

Every random quantity in the package draws from a generator keyed by
``(seed, domain, index)``.  Streams are independent per key, so changing
one dimension of a spec (say the number of resources) never reshuffles
draws belonging to another dimension.
"""

from __future__ import annotations

import numpy as np

# domain tags for substreams; values are arbitrary but frozen
DOMAIN_CONSUMPTION = 1
DOMAIN_WALK = 2
DOMAIN_PRICE = 3
DOMAIN_REGEN = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *key).

    The same arguments always produce the same stream regardless of what
    other streams were consumed before.
    """
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be >= 0")
    spawn = tuple(int(k) for k in key)
    if any(k < 0 or k >= 2**32 for k in spawn):
        raise ValueError("stream key parts must fit in uint32")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=spawn))
