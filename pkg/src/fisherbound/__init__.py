"""Measurement-driven lower bounds on the Fisher information of black-box systems.

The bound replaces the unknown output model by an exponential-family surrogate
whose sufficient statistics are a bank of output transformations. Only the mean
and covariance of those transformations over a calibrated parameter grid are
needed, and the resulting information value never exceeds the true one.
"""

from fisherbound.errors import FisherBoundError
from fisherbound.transforms import TransformKind, TransformSet, standard_transform_set, parse_transform_spec
from fisherbound.models import ModelSpec, DrawSource, make_model
from fisherbound.moments import MomentAccumulator, MomentSummary, MomentTriple, estimate_triple
from fisherbound.bound import (
    BoundPoint,
    RegularizationPolicy,
    derivative_mu,
    generic_bound,
    matched_bound,
    optimal_alpha,
    optimal_weights_normalized,
    solve_covariance,
)
from fisherbound.oracle import crlb, fim_closed_form, fim_quadrature

__version__ = "0.1.0"

__all__ = [
    "BoundPoint",
    "DrawSource",
    "FisherBoundError",
    "ModelSpec",
    "MomentAccumulator",
    "MomentSummary",
    "MomentTriple",
    "RegularizationPolicy",
    "TransformKind",
    "TransformSet",
    "crlb",
    "derivative_mu",
    "estimate_triple",
    "fim_closed_form",
    "fim_quadrature",
    "generic_bound",
    "make_model",
    "matched_bound",
    "optimal_alpha",
    "optimal_weights_normalized",
    "parse_transform_spec",
    "solve_covariance",
    "standard_transform_set",
]
