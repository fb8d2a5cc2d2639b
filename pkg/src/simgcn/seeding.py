"""Deterministic seed fan-out.

Every experiment has one master seed; folds, masks, weight initialization
and dropout each draw from a child seed derived from (master, role, index).
The derivation is platform-stable (crc32 + numpy SeedSequence), so whole
runs reproduce bit-exactly from the config seed alone.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, role: str, index: int = 0) -> int:
    entropy = [int(seed) & _MASK64, zlib.crc32(role.encode("utf-8")), int(index) & _MASK64]
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, np.uint64)[0])
