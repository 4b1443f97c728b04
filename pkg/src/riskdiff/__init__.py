"""Exposure effects and additive interaction from logistic models.

Estimates two standardized risk differences and their interaction
(difference of risk differences) from an observational cohort, and
propagates coefficient uncertainty by Monte Carlo sampling of the normal
approximation to the ML estimate: percentile intervals, joint confidence
ellipses, and tercile-conditional interaction intervals.
"""

__version__ = "0.1.0"

from .dataset import Cohort, ColumnSchema, SubjectRecord, describe, load_cohort
from .effects import (
    EffectTriple,
    StandardizationSet,
    effect_triple,
    marginal_risk,
    risk,
)
from .glm import FitResult, ModelSpec, Term, build_design, fit_logistic, lr_test
from .inference import (
    ConfidenceEllipse,
    IntervalEstimate,
    TercileReport,
    confidence_ellipse,
    delta_method_check,
    marginal_report,
    percentile_ci,
    quantile,
    tercile_report,
)
from .montecarlo import (
    EffectDistribution,
    cholesky,
    effect_distribution,
    sample_parameters,
)

__all__ = [
    "Cohort", "ColumnSchema", "SubjectRecord", "describe", "load_cohort",
    "EffectTriple", "StandardizationSet", "effect_triple", "marginal_risk",
    "risk",
    "FitResult", "ModelSpec", "Term", "build_design", "fit_logistic",
    "lr_test",
    "ConfidenceEllipse", "IntervalEstimate", "TercileReport",
    "confidence_ellipse", "delta_method_check", "marginal_report",
    "percentile_ci", "quantile", "tercile_report",
    "EffectDistribution", "cholesky", "effect_distribution",
    "sample_parameters",
]
