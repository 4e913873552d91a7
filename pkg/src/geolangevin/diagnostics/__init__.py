"""Empirical checks of the convergence theory: binned KL and W2, functional
inequalities, and the Fokker-Planck entropy dissipation solver."""

from geolangevin.diagnostics.divergence import bin_samples, kl_divergence, symmetric_kl, w2_distance
from geolangevin.diagnostics.fokker_planck import FokkerPlanckSphere, FPResult, fp_chart_residual, fp_evolve
from geolangevin.diagnostics.inequalities import (
    MomentCheck,
    RateFit,
    TalagrandCheck,
    grad_moment_check,
    lipschitz_estimate,
    lsi_lower_bound,
    rate_fit,
    talagrand_check,
)
from geolangevin.diagnostics.report import Checkpoint, DiagnosticsReport, ensemble_series, trace_series

__all__ = [
    "bin_samples",
    "kl_divergence",
    "symmetric_kl",
    "w2_distance",
    "FokkerPlanckSphere",
    "FPResult",
    "fp_chart_residual",
    "fp_evolve",
    "MomentCheck",
    "RateFit",
    "TalagrandCheck",
    "grad_moment_check",
    "lipschitz_estimate",
    "lsi_lower_bound",
    "rate_fit",
    "talagrand_check",
    "Checkpoint",
    "DiagnosticsReport",
    "ensemble_series",
    "trace_series",
]
