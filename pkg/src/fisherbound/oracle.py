"""Exact Fisher information references and the Cramér-Rao transform.

``fim_quadrature`` evaluates the defining integral of the squared score for any
model with an analytic density. The score is a central difference of the log
density in the parameter, so a new model only has to supply ``logpdf``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from fisherbound.errors import DegenerateInformationError, QuadratureError, UnsupportedError, ValidationError
from fisherbound.models import ModelSpec, Support

MAX_LEVEL = 30
MAX_PANELS = 1 << 14
GAUSS_ORDER = 10
RICIAN_FIXTURE_THETAS = (0.25, 0.5, 1.0, 1.5, 2.0)

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    fd_step_theta: float = 1e-5
    support: Optional[Support] = None

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1e-2:
            raise ValidationError(f"rel_tol must lie in (0, 1e-2), got {self.rel_tol!r}")
        if not self.fd_step_theta > 0:
            raise ValidationError("fd_step_theta must be positive")


def _gauss(f: Callable, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = f(x.ravel()).reshape(x.shape)
    return half * (vals @ _WEIGHTS)


def adaptive_integrate(f: Callable, a: float, b: float, rel_tol: float = 1e-8, max_level: int = MAX_LEVEL) -> float:
    """Integrate a vectorized ``f`` over the finite interval ``[a, b]``.

    Every panel is compared with the sum over its two halves; panels whose
    discrepancy exceeds their width-proportional share of the tolerance are
    bisected again, up to ``max_level`` bisections.
    """
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    whole = _gauss(f, lo, hi)
    accepted = 0.0
    accepted_err = 0.0
    history = []
    for level in range(max_level + 1):
        mid = 0.5 * (lo + hi)
        left = _gauss(f, lo, mid)
        right = _gauss(f, mid, hi)
        refined = left + right
        err = np.abs(whole - refined)
        estimate = accepted + float(refined.sum())
        history.append(estimate)
        target = rel_tol * abs(estimate)
        if accepted_err + float(err.sum()) <= target:
            return estimate
        ok = err <= target * (hi - lo) / (b - a)
        accepted += float(refined[ok].sum())
        accepted_err += float(err[ok].sum())
        if ok.all():
            return accepted
        todo = ~ok
        if 2 * int(todo.sum()) > MAX_PANELS:
            break
        lo = np.concatenate([lo[todo], mid[todo]])
        hi = np.concatenate([mid[todo], hi[todo]])
        whole = np.concatenate([left[todo], right[todo]])
    raise QuadratureError(
        f"adaptive quadrature did not converge (level {level}, {lo.size} open panels) "
        f"(last estimates {history[-2]!r}, {history[-1]!r})",
        history[-2:],
    )


def integrate_over(f: Callable, support: Support, rel_tol: float = 1e-8) -> float:
    """Integrate over a possibly infinite interval.

    An infinite end is reached through ``z = c ± s * t / (1 - t)``, ``t`` in [0, 1),
    with ``c`` and ``s`` taken from the support's center and scale.
    """
    lo, hi, c, s = support.lo, support.hi, support.center, support.scale
    if math.isfinite(lo) and math.isfinite(hi):
        return adaptive_integrate(f, lo, hi, rel_tol)

    def right_tail(start):
        def g(t):
            return f(start + s * t / (1.0 - t)) * s / (1.0 - t) ** 2

        return adaptive_integrate(g, 0.0, 1.0, rel_tol)

    def left_tail(end):
        def g(t):
            return f(end - s * t / (1.0 - t)) * s / (1.0 - t) ** 2

        return adaptive_integrate(g, 0.0, 1.0, rel_tol)

    if math.isfinite(lo):
        return right_tail(lo)
    if math.isfinite(hi):
        return left_tail(hi)
    return left_tail(c) + right_tail(c)


def _score_function(model: ModelSpec, theta: float, step: float) -> Callable:
    dom = model.theta_domain
    step = step * max(abs(theta), 1.0)
    up, down = theta + step, theta - step
    if up in dom and down in dom:
        span = 2.0 * step
    elif up in dom:
        down, span = theta, step
    elif down in dom:
        up, span = theta, step
    else:
        raise ValidationError(f"no admissible finite-difference step around theta={theta!r}")

    def score(z):
        return (model.log_density(z, up) - model.log_density(z, down)) / span

    return score


def _fisher_integrand(model: ModelSpec, theta: float, step: float) -> Callable:
    score = _score_function(model, theta, step)

    def f(z):
        with np.errstate(all="ignore"):
            lp = model.log_density(z, theta)
            val = score(z) ** 2 * np.exp(lp)
        return np.where(np.isfinite(val), val, 0.0)

    return f


def _discrete_sum(term: Callable, rel_tol: float, start_after: float) -> float:
    total = 0.0
    k0 = 0
    chunk = 64
    while True:
        k = np.arange(k0, k0 + chunk, dtype=float)
        t = term(k)
        total += float(t.sum())
        k0 += chunk
        last, prev = float(t[-1]), float(t[-2])
        if k0 > start_after and prev > 0 and last < prev:
            ratio = last / prev
            if last * ratio / (1.0 - ratio) <= rel_tol * abs(total):
                return total
        elif k0 > start_after and last == 0.0:
            return total
        if k0 > 1_000_000:
            raise QuadratureError("discrete sum did not converge", (total,))


def _require_density(model: ModelSpec) -> None:
    if model.pdf is None and model.logpdf is None:
        raise UnsupportedError(f"model {model.name!r} has no analytic density")


def fim_quadrature(model: ModelSpec, theta: float, spec: Optional[QuadratureSpec] = None) -> float:
    """Fisher information by numerical integration of the squared score."""
    _require_density(model)
    spec = spec or QuadratureSpec()
    model.check_theta(theta)
    f = _fisher_integrand(model, theta, spec.fd_step_theta)
    support = spec.support or (model.support(theta) if model.support else None)
    if support is None:
        raise UnsupportedError(f"model {model.name!r} does not declare its support")
    if model.discrete:
        return _discrete_sum(f, spec.rel_tol, support.center + 10.0 * support.scale)
    return max(integrate_over(f, support, spec.rel_tol), 0.0)


def density_mass(model: ModelSpec, theta: float, spec: Optional[QuadratureSpec] = None) -> float:
    """Total probability of the analytic density (should be 1)."""
    _require_density(model)
    spec = spec or QuadratureSpec()
    support = spec.support or model.support(theta)

    def p(z):
        with np.errstate(all="ignore"):
            val = np.exp(model.log_density(z, theta))
        return np.where(np.isfinite(val), val, 0.0)

    if model.discrete:
        return _discrete_sum(p, spec.rel_tol, support.center + 10.0 * support.scale)
    return integrate_over(p, support, spec.rel_tol)


def fim_closed_form(model: ModelSpec, theta: float) -> float:
    if model.input_fisher is None:
        raise UnsupportedError(f"model {model.name!r} has no closed-form Fisher information")
    model.check_theta(theta)
    return float(model.input_fisher(theta))


def crlb(fisher_value: float, n_samples: int = 1) -> float:
    """Cramér-Rao variance floor ``1 / (n F)``."""
    if n_samples < 1:
        raise ValidationError(f"sample count must be >= 1, got {n_samples!r}")
    if not fisher_value > 0:
        raise DegenerateInformationError(f"Fisher information {fisher_value!r} gives an unbounded variance floor")
    return 1.0 / (n_samples * fisher_value)


def rician_reference_table(
    thetas: Sequence[float] = RICIAN_FIXTURE_THETAS, rel_tol: float = 1e-10
) -> list[tuple[float, float, float]]:
    from fisherbound.models import rician_model

    model = rician_model()
    spec = QuadratureSpec(rel_tol=rel_tol)
    return [(t, fim_quadrature(model, t, spec), rel_tol) for t in thetas]


def write_rician_fixture(path, thetas: Sequence[float] = RICIAN_FIXTURE_THETAS, rel_tol: float = 1e-10) -> list:
    rows = rician_reference_table(thetas, rel_tol)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "fim", "rel_tol"])
        for t, fim, tol in rows:
            writer.writerow([f"{t:.17g}", f"{fim:.17g}", f"{tol:g}"])
    return rows


def read_rician_fixture(path) -> list[tuple[float, float, float]]:
    with open(path, newline="") as fh:
        return [(float(r["theta"]), float(r["fim"]), float(r["rel_tol"])) for r in csv.DictReader(fh)]
