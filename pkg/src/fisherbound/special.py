"""Exponentially scaled modified Bessel function of order zero."""

from __future__ import annotations

import numpy as np

# switch point between the power series and the large-argument expansion
_SERIES_LIMIT = 20.0
_SERIES_TERMS = 64
_ASYMPTOTIC_TERMS = 60


def _i0_series(x: np.ndarray) -> np.ndarray:
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
    return total


def _i0e_asymptotic(x: np.ndarray) -> np.ndarray:
    inv = 1.0 / (8.0 * x)
    term = np.ones_like(x)
    total = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS):
        nxt = term * (2 * k - 1) ** 2 * inv / k
        # truncate each element at its smallest term (the series is asymptotic)
        active &= nxt < term
        term = np.where(active, nxt, term)
        total = total + np.where(active, nxt, 0.0)
        if not active.any():
            break
    return total / np.sqrt(2.0 * np.pi * x)


def i0e(x):
    """``exp(-|x|) * I0(x)``, accurate to about 1e-14 relative for all real ``x``."""
    x = np.abs(np.asarray(x, dtype=float))
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= _SERIES_LIMIT
    if small.any():
        xs = x[small]
        out[small] = _i0_series(xs) * np.exp(-xs)
    if (~small).any():
        out[~small] = _i0e_asymptotic(x[~small])
    return out[0] if scalar else out


def log_i0(x):
    """``ln I0(x)`` without overflow."""
    x = np.abs(np.asarray(x, dtype=float))
    return x + np.log(i0e(x))
