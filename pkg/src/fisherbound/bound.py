"""Weighted and matched lower bounds on the Fisher information.

For weights ``beta`` and offset ``alpha`` the Cauchy-Schwarz inequality between
the true score and ``beta . phi(z) - alpha`` gives::

    F >= (beta . dmu)^2 / (beta' R beta + (alpha - beta . mu)^2)

The offset is best at ``alpha = beta . mu``; the weights are best along
``R^-1 dmu``, where the bound becomes ``dmu' R^-1 dmu`` (the single nonzero
eigenvalue of the rank-one matrix ``R^-1/2 dmu dmu' R^-1/2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from fisherbound.errors import DegenerateCovarianceError, DegenerateWeightsError, ValidationError
from fisherbound.linalg import jacobi_eigh
from fisherbound.moments import MomentTriple

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class RegularizationPolicy:
    """How to invert a covariance that may be singular or badly conditioned.

    ``truncated`` drops eigen-directions below ``tol * lambda_max``;
    ``ridge`` adds ``tol * lambda_max`` to the diagonal. With ``equilibrate``
    the spectrum is taken of the correlation matrix (unit diagonal), so the
    threshold is not dominated by the statistic with the largest scale.
    """

    mode: str = "truncated"
    tol: float = 1e-10
    equilibrate: bool = True

    def __post_init__(self):
        if self.mode not in ("truncated", "ridge"):
            raise ValidationError(f"unknown regularization mode {self.mode!r}")
        if not 0.0 < self.tol < 1.0:
            raise ValidationError(f"regularization tolerance must lie in (0, 1), got {self.tol!r}")

    @classmethod
    def ridge(cls, lam_rel: float = 1e-10, equilibrate: bool = True) -> "RegularizationPolicy":
        return cls("ridge", lam_rel, equilibrate)

    @classmethod
    def truncated(cls, rank_tol_rel: float = 1e-10, equilibrate: bool = True) -> "RegularizationPolicy":
        return cls("truncated", rank_tol_rel, equilibrate)


DEFAULT_POLICY = RegularizationPolicy()


@dataclass
class BoundPoint:
    theta: float
    value: float
    weights: np.ndarray
    dmu: np.ndarray
    cond: float
    effective_rank: int
    clipped: bool = False
    rel_se: float = math.nan
    error: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def weights_normalized(self) -> np.ndarray:
        norm = np.linalg.norm(self.weights)
        return self.weights / norm if norm > 0 else self.weights


def _check_symmetric(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValidationError(f"covariance must be square, got shape {R.shape}")
    if not np.isfinite(R).all():
        raise ValidationError("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(R))))
    if np.max(np.abs(R - R.T)) > SYMMETRY_TOL * scale:
        raise ValidationError("covariance is not symmetric")
    return 0.5 * (R + R.T)


def _equilibration(R: np.ndarray, policy: RegularizationPolicy) -> np.ndarray:
    if not policy.equilibrate:
        return np.ones(R.shape[0])
    d = np.sqrt(np.clip(np.diag(R), 0.0, None))
    # a constant statistic has a zero row and column; leave it unscaled
    return np.where(d > 0, d, 1.0)


def solve_covariance(R, v, policy: RegularizationPolicy = DEFAULT_POLICY):
    """Regularized solve of ``R x = v``; returns ``(x, cond, effective_rank)``."""
    R = _check_symmetric(R)
    v = np.asarray(v, dtype=float)
    if v.shape != (R.shape[0],):
        raise ValidationError(f"vector length {v.shape} does not match covariance {R.shape}")
    d = _equilibration(R, policy)
    C = R / np.outer(d, d)
    w, V = jacobi_eigh(C)
    lam_max = float(w[-1])
    if not lam_max > 0:
        raise DegenerateCovarianceError("covariance has no positive eigenvalue")
    cut = policy.tol * lam_max
    keep = w > cut
    rank = int(keep.sum())
    if rank == 0:
        raise DegenerateCovarianceError("all eigenvalues below the regularization tolerance")
    vs = v / d
    if policy.mode == "truncated":
        Vk = V[:, keep]
        xs = Vk @ ((Vk.T @ vs) / w[keep])
        cond = lam_max / float(w[keep].min())
    else:
        factor = cho_factor(C + cut * np.eye(C.shape[0]))
        xs = cho_solve(factor, vs)
        cond = (lam_max + cut) / (max(float(w[0]), 0.0) + cut)
    return xs / d, cond, rank


def matched_bound(dmu, R, policy: RegularizationPolicy = DEFAULT_POLICY, theta: float = math.nan) -> BoundPoint:
    """Best weighted bound ``dmu' R^-1 dmu`` with the maximizing (unnormalized) weights."""
    dmu = np.asarray(dmu, dtype=float)
    x, cond, rank = solve_covariance(R, dmu, policy)
    value = float(dmu @ x)
    clipped = False
    if value < 0.0:
        value, clipped = 0.0, True
    if not math.isfinite(value):
        raise DegenerateCovarianceError("bound evaluated to a non-finite value")
    return BoundPoint(theta, value, x, dmu, cond, rank, clipped)


def optimal_weights_normalized(dmu, R, policy: RegularizationPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Unit vector along ``R^-1/2 dmu`` (spectral square root, regularized per ``policy``)."""
    R = _check_symmetric(R)
    dmu = np.asarray(dmu, dtype=float)
    w, V = jacobi_eigh(R)
    lam_max = float(w[-1])
    if not lam_max > 0:
        raise DegenerateCovarianceError("covariance has no positive eigenvalue")
    cut = policy.tol * lam_max
    if policy.mode == "truncated":
        keep = w > cut
        if not keep.any():
            raise DegenerateCovarianceError("all eigenvalues below the regularization tolerance")
        Vk = V[:, keep]
        y = Vk @ ((Vk.T @ dmu) / np.sqrt(w[keep]))
    else:
        y = V @ ((V.T @ dmu) / np.sqrt(np.clip(w, 0.0, None) + cut))
    norm = float(np.linalg.norm(y))
    if norm == 0.0:
        raise DegenerateWeightsError("derivative vector has no component in the retained subspace")
    return y / norm


def derivative_mu(triple: MomentTriple) -> np.ndarray:
    """Central difference of the mean vector across the triple."""
    if not triple.h > 0:
        raise ValidationError("finite-difference step must be positive")
    return (triple.at_plus.mean - triple.at_minus.mean) / (2.0 * triple.h)


def optimal_alpha(beta, mu) -> float:
    return float(np.dot(beta, mu))


def generic_bound(beta, alpha: float, mu, dmu, R) -> float:
    beta = np.asarray(beta, dtype=float)
    if not np.any(beta):
        raise DegenerateWeightsError("weights are all zero")
    R = np.asarray(R, dtype=float)
    numerator = float(beta @ dmu) ** 2
    denominator = float(beta @ R @ beta) + (alpha - float(beta @ mu)) ** 2
    if not denominator > 0:
        raise DegenerateWeightsError("weighted statistic has zero second moment about alpha")
    return numerator / denominator


def bound_from_triple(triple: MomentTriple, policy: RegularizationPolicy = DEFAULT_POLICY) -> BoundPoint:
    return matched_bound(derivative_mu(triple), triple.at_center.cov, policy, theta=triple.theta)
