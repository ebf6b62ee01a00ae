"""Deterministic RNG streams derived from a master seed.

Per-unit streams (per tree, per fold, per repeat, per ROI) are derived from
(seed, *path) so results never depend on scheduling order.
"""

from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(path)))
