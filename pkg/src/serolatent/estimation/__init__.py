"""Histogram and likelihood estimation for latent seroreactivity models."""

from .families import FAMILIES, Family, get_family
from .fitting import METHODS, FitResult, bic, fit, kl_criterion, l2_criterion
from .histogram import HistogramSummary, build_histogram, histogram_on, sturges_bins
from .optimize import OptimizeSettings, optimize

__all__ = [
    "FAMILIES",
    "Family",
    "FitResult",
    "HistogramSummary",
    "METHODS",
    "OptimizeSettings",
    "bic",
    "build_histogram",
    "fit",
    "get_family",
    "histogram_on",
    "kl_criterion",
    "l2_criterion",
    "optimize",
    "sturges_bins",
]
