"""Deterministic stream addressing on top of the counter-based Philox engine.

Every consumer of randomness derives its generator from (seed, stream kind,
index), so results are independent of evaluation order and worker count, and
identical streams can be re-derived anywhere.
"""

from __future__ import annotations

import numpy as np

# Stream kinds; keep values unique across the package.
STREAM_WORLD = 0
STREAM_ANNOTATIONS = 1
STREAM_SAMPLES = 2
STREAM_OOD = 3
STREAM_PIXEL_POOL = 16


def philox_stream(seed: int, kind: int, index: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream kind, index)."""
    key = np.array([
        np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
        np.uint64(((kind & 0xFF) << 56) | (index & 0x00FFFFFFFFFFFFFF)),
    ])
    return np.random.Generator(np.random.Philox(key=key))
