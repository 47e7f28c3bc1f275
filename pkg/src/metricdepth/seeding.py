"""Deterministic child-stream derivation for replicated experiments.

Every replicated computation (simulation replicates, permutation draws,
label swaps) derives an independent generator from ``(seed, tag, index...)``
so results never depend on execution order or parallel scheduling.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

# Purpose tags keep streams for different uses disjoint under one user seed.
REPLICATE_TAG = 1
PERMUTATION_TAG = 2
SWAP_TAG = 3
SUBTEST_TAG = 4
SUBSAMPLE_TAG = 5


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise InvalidArgumentError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the child stream identified by (seed, *key)."""
    entropy = [check_seed(seed), *(int(k) for k in key)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def child_seed(seed: int, *key: int) -> int:
    """A derived integer seed, for APIs that take seeds rather than rngs."""
    return int(child_rng(seed, *key).integers(0, 2**63))
