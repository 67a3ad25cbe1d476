"""Counter-based uniforms shared by the compiled and NumPy episode kernels.

Every random number used inside an episode is a pure function of
``(key, episode id, round, slot)``, so results do not depend on batch size,
backend or scheduling.  The mixer is the SplitMix64 finalizer.
"""
from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SEED_SALT = 0x5851F42D4C957F2D
TO_UNIT = 2.0**-53


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def seed_key(seed: int) -> int:
    """64-bit stream key for an arbitrary integer seed."""
    return mix64((int(seed) & MASK) ^ _SEED_SALT)


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed, e.g. one per trial of an experiment."""
    return mix64((seed_key(seed) + (index + 1) * GOLDEN) & MASK) >> 1


def episode_key(key: int, episode: int) -> int:
    return mix64((key + (episode + 1) * GOLDEN) & MASK)


def uniform(ekey: int, counter: int) -> float:
    return (mix64((ekey + (counter + 1) * GOLDEN) & MASK) >> 11) * TO_UNIT


# NumPy twins; uint64 arrays wrap on overflow, which is the intended arithmetic.

_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U_GOLDEN = np.uint64(GOLDEN)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _U_M1
    z = z ^ (z >> np.uint64(27))
    z = z * _U_M2
    return z ^ (z >> np.uint64(31))


def episode_keys(key: int, episodes: np.ndarray) -> np.ndarray:
    ids = np.asarray(episodes, dtype=np.uint64)
    return mix64_array(np.uint64(key) + (ids + np.uint64(1)) * _U_GOLDEN)


def uniforms(ekeys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniforms for every pair of episode key (rows) and counter (columns)."""
    x = ekeys[:, None] + (counters[None, :] + np.uint64(1)) * _U_GOLDEN
    return (mix64_array(x) >> np.uint64(11)).astype(np.float64) * TO_UNIT
