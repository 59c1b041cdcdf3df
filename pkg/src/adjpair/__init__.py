"""Bivariate distributions with bounded multiplicative adjustments.

A joint law ``f1(x) f2(y) {1 + alpha h1(x) h2(y)}`` keeps the marginals
``f1`` and ``f2`` exactly, while the centred adjustments ``h = g - E g`` and
the scalar ``alpha`` set the dependence.
"""

from .adjustments import AdjustmentSpec, AdjFamily
from .bivariate import BivariateModel, alpha_range, corr_range, exact_alpha_range
from .datasets import CountTable, PairSample, Studies, builtin, load_csv
from .errors import (
    AdjPairError,
    ConfigurationError,
    ConvergenceError,
    DataError,
    DomainError,
    InvalidModelError,
    ParameterError,
)
from .inference import ConfidenceCurve, FitResult, fit, profile
from .marginals import Family, MarginalSpec

__version__ = "0.1.0"

__all__ = [
    "AdjustmentSpec",
    "AdjFamily",
    "BivariateModel",
    "alpha_range",
    "corr_range",
    "exact_alpha_range",
    "CountTable",
    "PairSample",
    "Studies",
    "builtin",
    "load_csv",
    "AdjPairError",
    "ConfigurationError",
    "ConvergenceError",
    "DataError",
    "DomainError",
    "InvalidModelError",
    "ParameterError",
    "ConfidenceCurve",
    "FitResult",
    "fit",
    "profile",
    "Family",
    "MarginalSpec",
]
