"""Seeded, platform-independent random streams.

All randomness in the package flows through Philox, a 64-bit counter-based
bit generator whose output is identical across platforms for a given key.
Streams are split by (seed, stream) key pairs so independent consumers
(obstacle placement, nickname sampling, distractor noise, ...) never share
state.
"""
from __future__ import annotations

import numpy as np

# Stream ids; keep stable, fixtures depend on them.
STREAM_OBSTACLES = 1
STREAM_NICKNAMES = 2
STREAM_CTRL_JITTER = 3
STREAM_PERLIN = 4
STREAM_DISTRACTOR = 5
STREAM_CANDIDATE_ORDER = 6


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream_id)."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(stream_id)])
    return np.random.Generator(np.random.Philox(key=key))
