"""Splittable, order-independent random streams.

Every stochastic step draws from a generator keyed by (master seed, purpose
tag, indices), so results do not depend on execution order or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(master_seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Independent generator for (master_seed, tag, *indices)."""
    key = (_tag_key(tag),) + tuple(int(i) for i in indices)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))
