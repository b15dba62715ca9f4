"""Minimizing-movement gradient flows on metric spaces, with EVI verification.

Carriers: Euclidean space and the quadratic Wasserstein space of the line
(in quantile coordinates).  See ``gradflow.mms`` for the schemes and
``gradflow.evi`` for the estimate checks.
"""
from .errors import (
    DomainError,
    GradFlowError,
    InputError,
    NumericalError,
    PreconditionError,
    RangeError,
    SchemeError,
    UnsupportedError,
)
from .euclidean import EuclideanSpace, QuadraticFunctional, exact_flow_quadratic, resolvent_quadratic
from .metric_core import (
    PIECEWISE_CONSTANT,
    PIECEWISE_LINEAR,
    DiscreteTrajectory,
    FunctionalDescriptor,
    SampledCurve,
    TimeGrid,
    e_lambda,
    estimate_slope,
    interpolate,
)
from .mms import ProximalObjective, RelaxedSchemeParams, StepCertificate, mms_run, mms_step
from .wasserstein1d import EnergySpec, QuantileMeasure, WassersteinSpace, energy_descriptor, w2

__version__ = "0.1.0"

__all__ = [
    "DiscreteTrajectory", "DomainError", "EnergySpec", "EuclideanSpace", "FunctionalDescriptor",
    "GradFlowError", "InputError", "NumericalError", "PIECEWISE_CONSTANT", "PIECEWISE_LINEAR",
    "PreconditionError", "ProximalObjective", "QuadraticFunctional", "QuantileMeasure", "RangeError",
    "RelaxedSchemeParams", "SampledCurve", "SchemeError", "StepCertificate", "TimeGrid",
    "UnsupportedError", "WassersteinSpace", "e_lambda", "energy_descriptor", "estimate_slope",
    "exact_flow_quadratic", "interpolate", "mms_run", "mms_step", "resolvent_quadratic", "w2",
]
