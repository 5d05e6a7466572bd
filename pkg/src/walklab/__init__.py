"""Monte Carlo and quadrature tools for random walks under extreme constraints.

Stable laws and increment models, renewal-function tables, ratio
experiments for walk functionals, and critical branching processes in a
random environment.
"""

__version__ = "0.1.0"

from .rng import RandomStream
from .stable import StableParams, make_stable_params, density, density_at_zero, positivity_rho, sample_stable, scaling_for
from .stats import Estimate
from .walk import exact_stable, gaussian, generate_path, logistic_logit, reverse_path, tail_equivalent
from .renewal import RenewalTable, estimate_U, estimate_V, estimate_V0, integral_against_table
from .functionals import ConstraintSpec, RatioReport, run_ratio_experiment
from .bpre import EnvironmentModel

__all__ = [
    "RandomStream",
    "StableParams",
    "make_stable_params",
    "density",
    "density_at_zero",
    "positivity_rho",
    "sample_stable",
    "scaling_for",
    "Estimate",
    "exact_stable",
    "gaussian",
    "tail_equivalent",
    "logistic_logit",
    "generate_path",
    "reverse_path",
    "RenewalTable",
    "estimate_U",
    "estimate_V",
    "estimate_V0",
    "integral_against_table",
    "ConstraintSpec",
    "RatioReport",
    "run_ratio_experiment",
    "EnvironmentModel",
]
