"""
mdivif: minimum divergence estimators and their influence functions.

Fits minimum divergence estimators, with or without equality
restrictions, for a small set of parametric families. Computes influence
functions, gross-error sensitivities and asymptotic covariances of the
estimator functionals. Cross-checks them against contamination refits and
Monte Carlo simulation.
"""

from .analysis import InfluenceRun, influence_curve
from .constraints import (
    Constraint,
    PhiMap,
    fixed_components,
    linear_constraint,
    no_constraint,
    phi_of_beta,
    proportional_mean,
)
from .divergences import (
    DisparityGenerator,
    DivergenceKernel,
    disparity_kernel,
    dpd_kernel,
    kl_kernel,
    parse_kernel,
    power_divergence_generator,
    sdiv_kernel,
)
from .errors import (
    ConstraintError,
    ConvergenceError,
    ExtrapolationError,
    InvalidParameterError,
    KernelInapplicableError,
    MdivifError,
    QuadratureError,
    RankDeficiencyError,
    SingularSystemError,
)
from .estimator import FitResult, FitSettings, contaminated_fit, fit_mde, fit_mde_data, fit_rmde
from .influence import (
    IFComponents,
    IFResult,
    RankDeficientSystem,
    asymptotic_variance_restricted,
    components,
    default_grid,
    gross_error_sensitivity,
    if_fixed_components,
    if_rank_deficient,
    if_restricted,
    if_unrestricted,
    restricted_components,
    zero_mean,
)
from .models import (
    Exponential,
    MVNormalIsotropic,
    Normal,
    Poisson,
    TrueDistribution,
    builtin_models,
    fisher_info,
    make_model,
)
from .oracle import OracleReport, compare, if_finite_difference, mc_variance
from .quadrature import QuadratureSpec, expectation_under, integrate

__all__ = [
    "Constraint",
    "ConstraintError",
    "ConvergenceError",
    "DisparityGenerator",
    "DivergenceKernel",
    "Exponential",
    "ExtrapolationError",
    "FitResult",
    "FitSettings",
    "IFComponents",
    "IFResult",
    "InfluenceRun",
    "InvalidParameterError",
    "KernelInapplicableError",
    "MVNormalIsotropic",
    "MdivifError",
    "Normal",
    "OracleReport",
    "PhiMap",
    "Poisson",
    "QuadratureError",
    "QuadratureSpec",
    "RankDeficiencyError",
    "RankDeficientSystem",
    "SingularSystemError",
    "TrueDistribution",
    "asymptotic_variance_restricted",
    "builtin_models",
    "compare",
    "components",
    "contaminated_fit",
    "default_grid",
    "disparity_kernel",
    "dpd_kernel",
    "expectation_under",
    "fisher_info",
    "fit_mde",
    "fit_mde_data",
    "fit_rmde",
    "fixed_components",
    "gross_error_sensitivity",
    "if_finite_difference",
    "if_fixed_components",
    "if_rank_deficient",
    "if_restricted",
    "if_unrestricted",
    "influence_curve",
    "integrate",
    "kl_kernel",
    "linear_constraint",
    "make_model",
    "mc_variance",
    "no_constraint",
    "parse_kernel",
    "phi_of_beta",
    "power_divergence_generator",
    "proportional_mean",
    "restricted_components",
    "sdiv_kernel",
    "zero_mean",
]

__version__ = "0.1.0"
