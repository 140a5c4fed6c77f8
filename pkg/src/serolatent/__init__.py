"""Latent seroreactivity models for continuous antibody measurements.

A latent level T in [0, 1] interpolates between a seronegative and a
seropositive Gaussian for the (log) antibody measurement. T may follow a
point-mass, Beta or Beta-mixture law whose parameters can depend on age.
"""

__version__ = "0.1.0"

from .age import (
    AcquisitionMean,
    AgeFree,
    Ama1Joint,
    CatalyticMixture,
    MeanVarLogitLog,
    Msp1Piecewise,
    PowerShapes,
    expected_y,
    simulate_at_ages,
)
from .estimation import FitResult, OptimizeSettings, bic, build_histogram, fit, sturges_bins
from .inference import (
    AgeGroupScheme,
    BootstrapSummary,
    Envelope,
    compare_models,
    fit_by_age_groups,
    parametric_bootstrap,
    validate_envelopes,
)
from .latent import (
    BetaMixture,
    ConditionalGaussian,
    ModelParams,
    SingleBeta,
    TwoPoint,
    ZeroMassPlusBeta,
    log_likelihood,
    marginal_density,
    simulate,
)
from .simstudy import Scenario, builtin_scenarios, run_study

__all__ = [
    "AcquisitionMean",
    "AgeFree",
    "AgeGroupScheme",
    "Ama1Joint",
    "BetaMixture",
    "BootstrapSummary",
    "CatalyticMixture",
    "ConditionalGaussian",
    "Envelope",
    "FitResult",
    "MeanVarLogitLog",
    "ModelParams",
    "Msp1Piecewise",
    "OptimizeSettings",
    "PowerShapes",
    "Scenario",
    "SingleBeta",
    "TwoPoint",
    "ZeroMassPlusBeta",
    "bic",
    "build_histogram",
    "builtin_scenarios",
    "compare_models",
    "expected_y",
    "fit",
    "fit_by_age_groups",
    "log_likelihood",
    "marginal_density",
    "parametric_bootstrap",
    "run_study",
    "simulate",
    "simulate_at_ages",
    "sturges_bins",
    "validate_envelopes",
]
