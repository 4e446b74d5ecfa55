"""Deterministic derivation of independent random streams from a master seed."""

from __future__ import annotations

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required for reproducible runs")
    return np.random.SeedSequence(int(seed))


def derive(seed, *keys: int) -> np.random.SeedSequence:
    """Child stream identified by ``keys``; independent of derivation order."""
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in keys))


def rng_for(seed, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive(seed, *keys))
