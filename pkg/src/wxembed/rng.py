"""Counter-derived random streams.

Every piece of randomness in the package is drawn from a Generator obtained
via `stream(seed, *path)`. The path is a tuple of small integers identifying
the consumer (purpose tag, channel index, epoch number, ...), so independent
streams can be opened in any order, from any thread, and still produce
identical values for identical (seed, path).
"""

from __future__ import annotations

import numpy as np

# purpose tags; keep stable, they are part of the determinism contract
MASK_FIELD = 0
CHANNEL = 1
STL1_NOISE = 2
PARAM_INIT = 3
SHUFFLE = 4
PROBE = 5
AUGMENT = 6


def stream(seed: int, *path: int) -> np.random.Generator:
    """Open the deterministic random stream identified by (seed, path)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path)))


def truncated_normal(gen: np.random.Generator, shape, sigma: float, bound: float = 2.0) -> np.ndarray:
    """Normal(0, sigma) truncated to +-bound*sigma, by deterministic resampling."""
    x = gen.standard_normal(shape)
    bad = np.abs(x) > bound
    while np.any(bad):
        x[bad] = gen.standard_normal(int(bad.sum()))
        bad = np.abs(x) > bound
    return x * sigma
