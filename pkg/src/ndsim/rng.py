"""Per-trial random streams.

Every trial draws from its own generator keyed by
``(master_seed, scenario_id, trial_index)`` so results do not depend on
execution order or on how trials are split across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def scenario_key(*parts) -> int:
    """Stable 63-bit integer for a scenario description (not Python's salted ``hash``)."""
    text = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big") >> 1


def trial_rng(master_seed: int, scenario_id: int, trial_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([master_seed & (2**64 - 1), scenario_id, trial_index])
    return np.random.Generator(np.random.PCG64(ss))


def sample_rho(rng: np.random.Generator, rho_max: int, size) -> np.ndarray:
    """Random advertising delays: continuous ``U[0, rho_max]`` rounded to whole µs."""
    if rho_max == 0:
        return np.zeros(size, dtype=np.int64)
    return np.rint(rng.uniform(0.0, rho_max, size)).astype(np.int64)
