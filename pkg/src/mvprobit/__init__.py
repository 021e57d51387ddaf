"""Two-stage composite likelihood estimation for the multivariate probit model."""

__version__ = "0.1.0"

from .bootstrap import BootstrapResult, bootstrap_se
from .datasets import load_six_cities
from .estimator import FitResult, MultivariateProbit, composite_loglik, fit, fit_stage1, fit_stage2
from .exceptions import (
    ConvergenceError,
    EstimationError,
    InputError,
    MvProbitError,
    NumericError,
    RankDeficiencyError,
    SeparationError,
)
from .experiments import run_coverage, run_timing, simulation_design
from .model import MvpModel
from .numerics import bvn_cdf, norm_cdf
from .options import SolverOptions
from .verification import SimSpec, full_loglik, full_mle_tiny, mvn_rect_prob, simulate_y

__all__ = [
    "__version__",
    "BootstrapResult",
    "bootstrap_se",
    "load_six_cities",
    "FitResult",
    "MultivariateProbit",
    "composite_loglik",
    "fit",
    "fit_stage1",
    "fit_stage2",
    "ConvergenceError",
    "EstimationError",
    "InputError",
    "MvProbitError",
    "NumericError",
    "RankDeficiencyError",
    "SeparationError",
    "run_coverage",
    "run_timing",
    "simulation_design",
    "MvpModel",
    "bvn_cdf",
    "norm_cdf",
    "SolverOptions",
    "SimSpec",
    "full_loglik",
    "full_mle_tiny",
    "mvn_rect_prob",
    "simulate_y",
]
