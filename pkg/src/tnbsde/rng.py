"""Reproducible random sources.

All randomness flows through numpy's Philox 4x64 counter-based bit generator
with an explicit 128-bit key, and Gaussian variates are produced by a
hand-coded Box-Muller transform on top of the raw uniform stream. Both pieces
are fully specified, so a (seed, stream, index) triple yields the same numbers
on any platform where Philox is available.

Key layout, 128 bits total::

    key = seed * 2**64 + stream * 2**48 + index

``seed`` is the user-facing run seed (< 2**64), ``stream`` a 16-bit purpose
tag from the constants below, and ``index`` a 48-bit sub-index (epoch number,
layer number, ...). Distinct triples never collide.
"""

from __future__ import annotations

import numpy as np

# Stream tags. Keep values stable: they are part of the reproducibility story.
GENERIC_STREAM = 0
PATH_STREAM = 1  # Brownian increments for SDE paths
INIT_STREAM = 2  # network weight initialization
MC_STREAM = 3  # Monte-Carlo reference estimates

_TWO_PI = 2.0 * np.pi


def stream_key(seed: int, stream: int, index: int = 0) -> int:
    """Pack (seed, stream, index) into a single 128-bit Philox key."""
    seed = int(seed)
    stream = int(stream)
    index = int(index)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    if not 0 <= stream < 2**16:
        raise ValueError(f"stream must be in [0, 2**16), got {stream}")
    if not 0 <= index < 2**48:
        raise ValueError(f"index must be in [0, 2**48), got {index}")
    return (seed << 64) | (stream << 48) | index


def normal(shape, mean: float, stddev: float, key: int) -> np.ndarray:
    """Gaussian tensor via Box-Muller over the keyed uniform stream.

    Draws ceil(n/2) uniform pairs (u1, u2); with r = sqrt(-2 ln(1 - u1)) the
    two branches r cos(2 pi u2) and r sin(2 pi u2) are concatenated and the
    first n kept. 1 - u1 lies in (0, 1], so the log never sees zero.
    """
    if isinstance(shape, (int, np.integer)):
        dims: tuple[int, ...] = (int(shape),)
    else:
        dims = tuple(int(s) for s in shape)
    if any(s <= 0 for s in dims):
        raise ValueError(f"extents must be positive, got {dims}")
    if stddev < 0:
        raise ValueError(f"stddev must be nonnegative, got {stddev}")
    n = 1
    for s in dims:
        n *= s
    if stddev == 0.0:
        return np.full(dims, float(mean), dtype=np.float64)
    gen = np.random.Generator(np.random.Philox(key=key))
    half = (n + 1) // 2
    u1 = gen.random(half)
    u2 = gen.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.concatenate([r * np.cos(_TWO_PI * u2), r * np.sin(_TWO_PI * u2)])[:n]
    return (mean + stddev * z).reshape(dims)


def randn(shape, mean: float = 0.0, stddev: float = 1.0, seed: int = 0) -> np.ndarray:
    """Seeded Gaussian tensor on the generic stream."""
    return normal(shape, mean, stddev, stream_key(seed, GENERIC_STREAM))
