"""Counter-based uniforms: splitmix64 of (key, counter).

Stream layout per sweep ``s`` of a chain with ``P`` pairs and ``N`` sites:
counter ``s * (P + 2N) + k`` drives pair ``k``; ``+ P + i`` the proposal or
heat-bath draw at site ``i``; ``+ P + N + i`` its Metropolis acceptance.
"""
from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_SCALE = 2.0**-53


def block_size(n_sites: int) -> int:
    return n_sites * (n_sites - 1) // 2 + 2 * n_sites


def uniform(key: int, ctr: int) -> float:
    z = (key + (ctr + 1) * GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _C1) & _MASK
    z = ((z ^ (z >> 27)) * _C2) & _MASK
    z ^= z >> 31
    return ((z >> 11) + 0.5) * _SCALE


def uniforms(key: int, ctr) -> np.ndarray:
    """Vectorized :func:`uniform` over an array of counters."""
    c = np.asarray(ctr, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + (c + np.uint64(1)) * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
        z ^= z >> np.uint64(31)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _SCALE


def chain_keys(seed: int, chains: int) -> list[int]:
    """Independent 64-bit keys, one per chain."""
    children = np.random.SeedSequence(seed).spawn(chains)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]
