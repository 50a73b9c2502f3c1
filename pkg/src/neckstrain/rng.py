"""Seedable, portable randomness used across the package.

Philox (4x64) is counter-based and published, so any reimplementation can
reproduce the streams; a (seed, stream_id) pair keys each independent stream.
Normal deviates avoid numpy's ziggurat on purpose: Box-Muller over the
documented uniform-double conversion keeps the whole chain specified.
"""
from __future__ import annotations

import numpy as np


def philox_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent generator for (seed, stream_id)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def box_muller_normals(gen: np.random.Generator, count: int) -> np.ndarray:
    """Standard normals as interleaved Box-Muller pairs.

    z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2), z1 = same with sin; output order is
    (z0, z1, z0, z1, ...) truncated to count.
    """
    if count == 0:
        return np.empty(0)
    pairs = (count + 1) // 2
    u = gen.random(2 * pairs)
    u1 = u[0::2]
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(angle)
    out[1::2] = r * np.sin(angle)
    return out[:count]
