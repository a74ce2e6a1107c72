"""Named, index-addressed random sub-streams derived from one master seed.

Every consumer of randomness asks for ``stream(seed, "offers", grid_idx, rep)``
style generators, so results do not depend on iteration order or on which
other stages ran first.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "stream_key"]


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, name: str, *indices: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(stream_key(name), *(int(i) for i in indices))
    )
    return np.random.default_rng(ss)
