"""Estimators computed from shot sets or from exact state-vector ensembles."""
from .conditional import ConditionalDensity, conditional_density
from .correlators import (CorrelationFit, CorrelationMap, correlation_map, fit_correlation_length, g2_density,
                          g2_m, staggered_field)
from .critical import CriticalPoint, NoPeakError, critical_point
from .exact import density_moments, exact_ensemble
from .fourier import FourierSpectrum, fourier, order_parameters
from .kz import (CollapseCurves, NuFit, RescaledCurve, collapse_distance, fit_nu, kz_exponents, kz_rescale,
                 synthetic_family)

__all__ = [
    "CollapseCurves", "ConditionalDensity", "CorrelationFit", "CorrelationMap", "CriticalPoint",
    "FourierSpectrum", "NoPeakError", "NuFit", "RescaledCurve", "collapse_distance", "conditional_density",
    "correlation_map", "critical_point", "density_moments", "exact_ensemble", "fit_correlation_length",
    "fit_nu", "fourier", "g2_density", "g2_m", "kz_exponents", "kz_rescale", "order_parameters",
    "staggered_field", "synthetic_family",
]
