"""Cyclic Jacobi eigendecomposition for small dense symmetric matrices."""

from __future__ import annotations

import math

import numpy as np

from fisherbound.errors import ValidationError

JACOBI_TOL = 1e-14
MAX_SWEEPS = 100


def off_diagonal_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(matrix, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a symmetric matrix.

    Sweeps rotate every off-diagonal pair in row-cyclic order. A pair is left
    alone once ``|a_pq| <= tol * sqrt(|a_pp a_qq|)``; this relative test keeps
    small eigenvalues of graded matrices accurate. Iteration stops after a sweep
    with no rotation, or when the off-diagonal norm is negligible against the
    matrix norm.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    if scale == 0.0 or n == 1:
        return np.diag(a).copy(), v
    floor = 1e-300 * scale
    for _ in range(max_sweeps):
        if off_diagonal_norm(a) <= floor:
            break
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * math.sqrt(abs(a[p, p] * a[q, q])) or abs(apq) <= floor:
                    continue
                rotated = True
                # rotation angle from the stable tangent formula
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                tau_half = s / (1.0 + c)
                # diagonal via the cancellation-free update
                app, aqq = a[p, p] - t * apq, a[q, q] + t * apq
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = ap - s * (aq + tau_half * ap)
                a[:, q] = aq + s * (ap - tau_half * aq)
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p], a[q, q] = app, aqq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            break
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
