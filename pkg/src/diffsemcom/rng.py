"""Deterministic RNG stream derivation.

Every random quantity in the package is drawn from an explicitly passed
``numpy.random.Generator``. Streams are derived from ``(master_seed, *key)``
via SeedSequence spawn keys, so a stream is reproducible from its key alone,
independent of the order streams are created in. That is what makes parallel
and serial sweeps produce identical results.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, *key)."""
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(k) for k in key)
    )
    return np.random.default_rng(ss)
