"""Seeded random streams with a per-shot counter scheme."""

from __future__ import annotations

import numpy as np


def shot_stream(seed: int, shot: int, *, purpose: int = 0) -> np.random.Generator:
    """Return the generator for ``shot`` of a run seeded with ``seed``.

    Shot ``i`` always draws from ``SeedSequence(seed, spawn_key=(purpose, i))``
    so adding shots never perturbs the outcomes of earlier ones.
    """

    sequence = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(purpose, shot))
    return np.random.Generator(np.random.PCG64(sequence))

