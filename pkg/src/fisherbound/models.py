"""Black-box samplers for the nonlinear systems and the exponential-family references.

A model maps the parameter and a block of counter-based uniforms to output
samples. Analytic densities and input-side Fisher information are attached
where they exist so the oracle can check the bound against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, ndtri

from fisherbound import rng
from fisherbound.errors import DomainError
from fisherbound.special import i0e

SALEH_A = 2.1587
SALEH_B = 1.1517
RICIAN_ANGLE = math.pi / 7
CUBIC_SETUPS = ((0.0, 1.0), (1.0, 1.0), (0.0, 2.0), (2.0, 2.0))
POISSON_MAX_RATE = 30.0

MODEL_NAMES = ("saleh", "rician", "cubic", "ref:gauss-mean", "ref:gauss-var", "ref:exp", "ref:poisson")


@dataclass(frozen=True)
class ThetaDomain:
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def __contains__(self, theta: float) -> bool:
        if not math.isfinite(theta):
            return False
        above = theta >= self.lo if self.lo_closed else theta > self.lo
        below = theta <= self.hi if self.hi_closed else theta < self.hi
        return above and below

    def __str__(self):
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"


@dataclass(frozen=True)
class DrawSource:
    """Position of one sample in the counter-based stream."""

    seed: int
    stream_index: int

    def uniforms(self, width: int = 1) -> np.ndarray:
        return rng.uniforms(self.seed, self.stream_index, 1, width)[0]


@dataclass(frozen=True)
class Support:
    """Integration range for the density; ``center``/``scale`` steer the infinite-end mapping."""

    lo: float
    hi: float
    center: float = 0.0
    scale: float = 1.0


@dataclass(frozen=True)
class ModelSpec:
    name: str
    transform: Callable[[float, np.ndarray], np.ndarray]
    n_uniforms: int
    theta_domain: ThetaDomain
    pdf: Optional[Callable] = None
    logpdf: Optional[Callable] = None
    input_fisher: Optional[Callable[[float], float]] = None
    support: Optional[Callable[[float], Support]] = None
    discrete: bool = False
    fd_rel_step: float = 0.01
    params: dict = field(default_factory=dict)

    def check_theta(self, theta: float, what: str = "theta") -> None:
        if theta not in self.theta_domain:
            raise DomainError(f"{self.name}: {what}={theta!r} outside domain {self.theta_domain}")

    def sample(self, theta: float, draw: DrawSource) -> float:
        self.check_theta(theta)
        u = draw.uniforms(self.n_uniforms)
        return float(self.transform(theta, u[None, :])[0])

    def sample_block(self, theta: float, seed: int, start: int, count: int) -> np.ndarray:
        """Outputs for sample indices ``start .. start+count-1``."""
        self.check_theta(theta)
        return self.transform(theta, rng.uniforms(seed, start, count, self.n_uniforms))

    def log_density(self, z, theta):
        if self.logpdf is not None:
            return self.logpdf(z, theta)
        if self.pdf is None:
            return None
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(z, theta))

    def describe(self) -> str:
        if not self.params:
            return self.name
        args = ", ".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.name}({args})"


def _gauss_logpdf(z, mean, var):
    z = np.asarray(z, dtype=float)
    return -0.5 * (z - mean) ** 2 / var - 0.5 * math.log(2.0 * math.pi * var)


def saleh_model(a: float = SALEH_A, b: float = SALEH_B) -> ModelSpec:
    """Saleh amplifier ``a x / (1 + b x^2)`` driven by ``x ~ N(0, theta)``."""
    if a == 0:
        raise DomainError("saleh gain a must be nonzero")
    if not b > 0:
        raise DomainError("saleh saturation b must be positive")

    def transform(theta, u):
        x = math.sqrt(theta) * ndtri(u[:, 0])
        return a * x / (1.0 + b * x * x)

    return ModelSpec(
        name="saleh",
        transform=transform,
        n_uniforms=1,
        theta_domain=ThetaDomain(0.0, math.inf),
        input_fisher=lambda theta: 1.0 / (2.0 * theta * theta),
        params={"a": a, "b": b},
    )


def rician_logpdf(z, theta):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(z) - 0.5 * (z - theta) ** 2 + np.log(i0e(z * theta))
    return np.where(z > 0, out, -np.inf)


def rician_pdf(z, theta):
    z = np.asarray(z, dtype=float)
    zc = np.maximum(z, 0.0)
    return np.where(z > 0, zc * np.exp(-0.5 * (zc - theta) ** 2) * i0e(zc * theta), 0.0)


def rician_model(angle_a: float = RICIAN_ANGLE) -> ModelSpec:
    """Magnitude of a unit-variance complex Gaussian whose mean has modulus ``theta``."""
    ca, sa = math.cos(angle_a), math.sin(angle_a)

    def transform(theta, u):
        n = ndtri(u)
        return np.hypot(theta * ca + n[:, 0], theta * sa + n[:, 1])

    return ModelSpec(
        name="rician",
        transform=transform,
        n_uniforms=2,
        theta_domain=ThetaDomain(0.0, math.inf, lo_closed=True),
        pdf=rician_pdf,
        logpdf=rician_logpdf,
        input_fisher=lambda theta: 1.0,
        support=lambda theta: Support(0.0, math.inf, 0.0, max(1.0, theta)),
        params={"angle": angle_a},
    )


def cubic_model(input_mean_a: float, input_var_b: float) -> ModelSpec:
    """Cubic regression ``theta x^3 + x`` with ``x ~ N(a, b)``."""
    if not input_var_b > 0:
        raise DomainError("cubic input variance b must be positive")
    a, sd = input_mean_a, math.sqrt(input_var_b)

    def transform(theta, u):
        x = a + sd * ndtri(u[:, 0])
        return theta * x**3 + x

    return ModelSpec(
        name="cubic",
        transform=transform,
        n_uniforms=1,
        theta_domain=ThetaDomain(0.0, math.inf),
        params={"a": input_mean_a, "b": input_var_b},
    )


def gaussian_mean_model(sigma2: float = 1.0) -> ModelSpec:
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    sd = math.sqrt(sigma2)
    return ModelSpec(
        name="ref:gauss-mean",
        transform=lambda theta, u: theta + sd * ndtri(u[:, 0]),
        n_uniforms=1,
        theta_domain=ThetaDomain(),
        pdf=lambda z, theta: np.exp(_gauss_logpdf(z, theta, sigma2)),
        logpdf=lambda z, theta: _gauss_logpdf(z, theta, sigma2),
        input_fisher=lambda theta: 1.0 / sigma2,
        support=lambda theta: Support(-math.inf, math.inf, theta, sd),
        params={"sigma2": sigma2},
    )


def gaussian_variance_model() -> ModelSpec:
    return ModelSpec(
        name="ref:gauss-var",
        transform=lambda theta, u: math.sqrt(theta) * ndtri(u[:, 0]),
        n_uniforms=1,
        theta_domain=ThetaDomain(0.0, math.inf),
        pdf=lambda z, theta: np.exp(_gauss_logpdf(z, 0.0, theta)),
        logpdf=lambda z, theta: _gauss_logpdf(z, 0.0, theta),
        input_fisher=lambda theta: 1.0 / (2.0 * theta * theta),
        support=lambda theta: Support(-math.inf, math.inf, 0.0, math.sqrt(theta)),
    )


def _exp_logpdf(z, theta):
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, math.log(theta) - theta * z, -np.inf)


def exponential_rate_model() -> ModelSpec:
    return ModelSpec(
        name="ref:exp",
        transform=lambda theta, u: -np.log(u[:, 0]) / theta,
        n_uniforms=1,
        theta_domain=ThetaDomain(0.0, math.inf),
        pdf=lambda z, theta: np.exp(_exp_logpdf(z, theta)),
        logpdf=_exp_logpdf,
        input_fisher=lambda theta: 1.0 / (theta * theta),
        support=lambda theta: Support(0.0, math.inf, 0.0, 1.0 / theta),
    )


def poisson_inverse(theta: float, u: np.ndarray) -> np.ndarray:
    """Inversion by sequential search: smallest ``k`` with ``CDF(k) >= u``."""
    p = math.exp(-theta)
    cdf = p
    z = np.zeros(u.shape)
    pending = u > cdf
    k = 0
    while pending.any():
        k += 1
        p *= theta / k
        cdf += p
        z[pending] = k
        if p == 0.0:
            break
        pending &= u > cdf
    return z


def _poisson_logpmf(k, theta):
    k = np.asarray(k, dtype=float)
    return k * math.log(theta) - theta - gammaln(k + 1.0)


def poisson_model() -> ModelSpec:
    return ModelSpec(
        name="ref:poisson",
        transform=lambda theta, u: poisson_inverse(theta, u[:, 0]),
        n_uniforms=1,
        theta_domain=ThetaDomain(0.0, POISSON_MAX_RATE, hi_closed=True),
        pdf=lambda k, theta: np.exp(_poisson_logpmf(k, theta)),
        logpdf=_poisson_logpmf,
        input_fisher=lambda theta: 1.0 / theta,
        support=lambda theta: Support(0.0, math.inf, theta, math.sqrt(theta)),
        discrete=True,
        # CRN differences of a step-valued sampler have variance ~1/h
        fd_rel_step=0.1,
    )


_REFERENCE = {
    "gauss-mean": gaussian_mean_model,
    "gauss-var": gaussian_variance_model,
    "exp": exponential_rate_model,
    "poisson": poisson_model,
}


def reference_model(family: str, sigma2: float = 1.0) -> ModelSpec:
    """Exponential-family reference: ``gauss-mean``, ``gauss-var``, ``exp`` or ``poisson``."""
    family = family.removeprefix("ref:")
    if family not in _REFERENCE:
        raise DomainError(f"unknown reference family {family!r}")
    if family == "gauss-mean":
        return gaussian_mean_model(sigma2)
    return _REFERENCE[family]()


def make_model(
    name: str,
    a: Optional[float] = None,
    b: Optional[float] = None,
    sigma2: Optional[float] = None,
    angle: Optional[float] = None,
) -> ModelSpec:
    """Build a model from its CLI selection string and flags."""
    if name == "saleh":
        return saleh_model(SALEH_A if a is None else a, SALEH_B if b is None else b)
    if name == "rician":
        return rician_model(RICIAN_ANGLE if angle is None else angle)
    if name == "cubic":
        return cubic_model(0.0 if a is None else a, 1.0 if b is None else b)
    if name.startswith("ref:"):
        return reference_model(name, 1.0 if sigma2 is None else sigma2)
    raise DomainError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
