"""Seed handling: one master seed, independent child streams by task index."""

from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def child_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Child seed sequences; child ``i`` depends only on ``(seed, i)``."""
    return np.random.SeedSequence(seed).spawn(count)


def child_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in child_seeds(seed, count)]


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic integer seed for a task addressed by ``path``."""
    ss = np.random.SeedSequence([seed, *path])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
