"""Deterministic random streams derived from one master seed.

Every parallelizable unit (replicate, mode, chain) gets its own stream
keyed by stable labels, so reruns with the same master seed reproduce
every output byte regardless of execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0x7FFFFFFF
    digest = hashlib.sha256(str(label).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def spawn_rng(master_seed: int, *labels) -> np.random.Generator:
    words = [int(master_seed) & 0xFFFFFFFF] + [_label_word(lab) for lab in labels]
    return np.random.default_rng(np.random.SeedSequence(words))
