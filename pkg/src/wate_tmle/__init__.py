"""One-step targeted estimation of weighted average treatment effects.

The estimator moves initial nuisance fits along a path whose score is the
efficient influence function, stops where the fold-mean score vanishes, and
cross-fits the resulting plug-in estimates.
"""
__version__ = "0.1.0"

from .bracketing import BracketReport, constants, diagnose
from .crossfit import Estimate, cross_fit_estimate, split_folds, wald_ci
from .eif import EifContext, d_full, d_restricted
from .model import Dataset, InputError, NuisanceValues, omega, psi, read_csv
from .splines import SplineFit, SplineFitter, fit_nuisances
from .targeting import TargetingConfig, solve_root, targeted_fold_fit
from .ulfp import Path, PathConfig, integrate_path, picard_solve
from .weights import WeightSpec, frak_c, lambda_bounds, lambda_eval, parse_weight

__all__ = [
    "BracketReport", "Dataset", "EifContext", "Estimate", "InputError", "NuisanceValues", "Path",
    "PathConfig", "SplineFit", "SplineFitter", "TargetingConfig", "WeightSpec", "constants",
    "cross_fit_estimate", "d_full", "d_restricted", "diagnose", "fit_nuisances", "frak_c",
    "integrate_path", "lambda_bounds", "lambda_eval", "omega", "parse_weight", "picard_solve", "psi",
    "read_csv", "solve_root", "split_folds", "targeted_fold_fit", "wald_ci",
]
