"""Machine-checkable property suites for the bound.

Each suite returns a :class:`SuiteReport` listing individual checks with the
measured margin (positive means the check passed with room to spare).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fisherbound.bound import DEFAULT_POLICY, bound_from_triple, derivative_mu, generic_bound, matched_bound, optimal_alpha
from fisherbound.experiments import DEFAULT_N, DEFAULT_SEED, ExperimentConfig, evaluate_point
from fisherbound.models import make_model, rician_model, saleh_model
from fisherbound.moments import estimate_triple
from fisherbound.oracle import fim_closed_form, fim_quadrature, QuadratureSpec
from fisherbound.transforms import parse_transform_spec, standard_transform_set

SUITES = ("tightness", "conservativeness", "matching", "appendix_alpha", "monotonicity")

TIGHTNESS_CASES = (("ref:gauss-mean", "z"), ("ref:gauss-var", "z2"), ("ref:exp", "z"), ("ref:poisson", "z"))
TIGHTNESS_THETAS = (0.5, 1.0, 2.0)
TIGHTNESS_TOL = 0.02
CONSERVATIVE_THETAS = (0.25, 0.5, 1.0, 1.5, 2.0)
CONSERVATIVE_SEEDS = (1, 2, 3, 4, 5)
MATCHING_TOL = 1e-10
MONOTONE_SLACK = 1e-10


@dataclass
class Check:
    label: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class SuiteReport:
    name: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, label, passed, margin, detail=""):
        self.checks.append(Check(label, bool(passed), float(margin), detail))

    def summary(self) -> str:
        worst = min(self.checks, key=lambda c: c.margin) if self.checks else None
        status = "PASS" if self.passed else "FAIL"
        ok = sum(c.passed for c in self.checks)
        tail = f"; worst margin {worst.margin:.3g} ({worst.label})" if worst else ""
        return f"{status} {self.name}: {ok}/{len(self.checks)} checks{tail}"

    def lines(self) -> list[str]:
        out = [self.summary()]
        for c in self.checks:
            out.append(f"  {'ok  ' if c.passed else 'FAIL'} {c.label}: margin {c.margin:.3g} {c.detail}".rstrip())
        return out


def tightness(n_samples: int = DEFAULT_N, seed: int = DEFAULT_SEED) -> SuiteReport:
    """With the family's sufficient statistic the matched bound recovers F."""
    report = SuiteReport("tightness")
    for name, spec in TIGHTNESS_CASES:
        model = make_model(name)
        tset = parse_transform_spec(spec)
        for theta in TIGHTNESS_THETAS:
            triple = estimate_triple(model, tset, theta, n=n_samples, seed=seed)
            value = bound_from_triple(triple).value
            exact = fim_closed_form(model, theta)
            rel = abs(value / exact - 1.0)
            report.add(f"{name} [{spec}] theta={theta:g}", rel < TIGHTNESS_TOL, TIGHTNESS_TOL - rel,
                       f"bound={value:.6g} exact={exact:.6g}")
    return report


def conservativeness(n_samples: int = DEFAULT_N, seeds=CONSERVATIVE_SEEDS) -> SuiteReport:
    """Rician bound never exceeds the quadrature FIM beyond 3 bootstrap standard errors."""
    report = SuiteReport("conservativeness")
    model = rician_model()
    tset = standard_transform_set()
    for theta in CONSERVATIVE_THETAS:
        exact = fim_quadrature(model, theta)
        for seed in seeds:
            cfg = ExperimentConfig(model="rician", n_samples=n_samples, seed=seed)
            point = evaluate_point(model, tset, theta, cfg)
            eps = point.rel_se if math.isfinite(point.rel_se) else 0.0
            limit = exact * (1.0 + 3.0 * eps)
            report.add(f"rician theta={theta:g} seed={seed}", point.value <= limit, (limit - point.value) / exact,
                       f"bound={point.value:.6g} fim={exact:.6g} eps={eps:.3g}")
    return report


def matching(n_samples: int = DEFAULT_N, seed: int = DEFAULT_SEED, draws: int = 200) -> SuiteReport:
    """Matched bound dominates the weighted bound for random weights on Rician moments."""
    report = SuiteReport("matching")
    triple = estimate_triple(rician_model(), standard_transform_set(), 1.0, n=n_samples, seed=seed)
    dmu = derivative_mu(triple)
    mu, R = triple.at_center.mean, triple.at_center.cov
    best = matched_bound(dmu, R, DEFAULT_POLICY).value
    gen = np.random.default_rng(seed)
    worst = math.inf
    violations = 0
    for _ in range(draws):
        beta = gen.standard_normal(len(dmu))
        g = generic_bound(beta, optimal_alpha(beta, mu), mu, dmu, R)
        margin = (best * (1.0 + MATCHING_TOL) - g) / best
        worst = min(worst, margin)
        violations += margin < 0
    report.add(f"rician theta=1, {draws} random weights", violations == 0, worst,
               f"matched={best:.6g} violations={violations}")
    return report


def random_fixture(gen: np.random.Generator, dim: int):
    a = gen.standard_normal((dim, dim))
    R = a @ a.T + 0.1 * np.eye(dim)
    return gen.standard_normal(dim), gen.standard_normal(dim), gen.standard_normal(dim), R


def appendix_alpha(fixtures: int = 20, perturbations: int = 100, seed: int = DEFAULT_SEED) -> SuiteReport:
    """The offset ``beta . mu`` beats every perturbed offset."""
    report = SuiteReport("appendix_alpha")
    gen = np.random.default_rng(seed)
    for i in range(fixtures):
        dim = int(gen.integers(1, 8))
        beta, mu, dmu, R = random_fixture(gen, dim)
        alpha = optimal_alpha(beta, mu)
        best = generic_bound(beta, alpha, mu, dmu, R)
        deltas = gen.uniform(-1.0, 1.0, perturbations)
        deltas = deltas[deltas != 0.0]
        others = np.array([generic_bound(beta, alpha + d, mu, dmu, R) for d in deltas])
        ok = bool(np.all(best > others))
        margin = float(np.min(best - others)) / best if best > 0 else 0.0
        report.add(f"fixture {i} (L={dim})", ok, margin)
    return report


def monotonicity(n_samples: int = DEFAULT_N, seed: int = DEFAULT_SEED, theta: float = 1.0) -> SuiteReport:
    """Nested transform banks on shared samples never lower the matched bound."""
    report = SuiteReport("monotonicity")
    full = standard_transform_set()
    triple = estimate_triple(saleh_model(), full, theta, n=n_samples, seed=seed)
    values = [bound_from_triple(triple.subset(k)).value for k in range(1, len(full) + 1)]
    for k in range(1, len(values)):
        step = values[k] - values[k - 1]
        report.add(f"{full.subset(k).spec} -> +{full.kinds[k].token}", step >= -MONOTONE_SLACK,
                   step + MONOTONE_SLACK, f"{values[k - 1]:.6g} -> {values[k]:.6g}")
    return report


def validate(suite: str, n_samples: int = DEFAULT_N) -> SuiteReport:
    if suite == "tightness":
        return tightness(n_samples)
    if suite == "conservativeness":
        return conservativeness(n_samples)
    if suite == "matching":
        return matching(n_samples)
    if suite == "appendix_alpha":
        return appendix_alpha()
    if suite == "monotonicity":
        return monotonicity(n_samples)
    raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")


def oracle_summary(name: str, theta: float, **params) -> dict:
    """Closed-form and quadrature FIM for one model, where available."""
    model = make_model(name, **params)
    out = {"model": model.describe(), "theta": theta, "closed_form": None, "input_fisher": None, "quadrature": None}
    if model.input_fisher is not None:
        # for the reference families the observation is the input itself
        key = "closed_form" if model.name.startswith("ref:") else "input_fisher"
        out[key] = fim_closed_form(model, theta)
    if model.pdf is not None or model.logpdf is not None:
        out["quadrature"] = fim_quadrature(model, theta, QuadratureSpec())
    return out
