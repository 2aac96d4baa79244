"""Counter-based random draws.

Every uniform is a pure function of ``(seed, sample index, slot)``: a SplitMix64
style finalizer is applied to a Weyl sequence keyed by the seed. Nothing is
carried between calls, so a block of samples can be drawn by any worker in any
order and reproduce the same values bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0**-53


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def stream_key(seed: int) -> np.uint64:
    if not 0 <= int(seed) <= _MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    with np.errstate(over="ignore"):
        return _mix64(np.array([seed], dtype=np.uint64) + _GOLDEN)[0]


def uniforms(seed: int, start: int, count: int, width: int = 1) -> np.ndarray:
    """Uniform variates in the open interval (0, 1), shape ``(count, width)``.

    Row ``i`` belongs to sample index ``start + i``; column ``j`` is its j-th draw.
    """
    key = stream_key(seed)
    idx = np.arange(start, start + count, dtype=np.uint64)
    ctr = idx[:, None] * np.uint64(width) + np.arange(width, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        bits = _mix64(key + (ctr + np.uint64(1)) * _GOLDEN)
    # 53 high bits, centred in their cell: never exactly 0 or 1
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TO_UNIT


def normals(seed: int, start: int, count: int, width: int = 1) -> np.ndarray:
    """Standard normal variates by inverse-CDF transform of :func:`uniforms`."""
    return ndtri(uniforms(seed, start, count, width))
