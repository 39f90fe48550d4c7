"""Counter-based random streams.

Every random draw in a simulation is addressed by ``(seed, step, purpose,
index)``. Draws are taken from a Philox generator whose key is derived from
the seed and whose counter encodes the step and purpose, so the value an
agent receives never depends on how the work was partitioned.

Seed derivation for ensemble members uses SplitMix64:

    seed_r = splitmix64(master + (r + 1) * 0x9E3779B97F4A7C15)   (mod 2**64)

with the standard finalizer (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9
and 0x94D049BB133111EB). This derivation is part of the manifest contract.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# counter word 2 of the Philox state
PURPOSE_UPDATE = 0
PURPOSE_INIT = 1
PURPOSE_ORDER = 2
PURPOSE_PROBE = 3


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Seed of ensemble member ``index`` under ``master``."""
    return mix64((master + (index + 1) * GOLDEN_GAMMA) & MASK64)


def stream(seed: int, step: int, purpose: int = PURPOSE_UPDATE) -> np.random.Generator:
    """Generator for one ``(seed, step, purpose)`` stream.

    The i-th double drawn by ``.random()`` is a pure function of
    ``(seed, step, purpose, i)``.
    """
    seed &= MASK64
    key = (mix64(seed) << 64) | mix64(seed ^ GOLDEN_GAMMA)
    bitgen = np.random.Philox(key=key, counter=[0, step & MASK64, purpose, 0])
    return np.random.Generator(bitgen)


def uniforms(seed: int, step: int, n: int, purpose: int = PURPOSE_UPDATE) -> np.ndarray:
    """``n`` uniform doubles in [0, 1), one per agent index."""
    return stream(seed, step, purpose).random(n)
