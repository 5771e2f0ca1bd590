"""Recovery of ridge functions f(x) = phi(<a, x>) from point evaluations."""
from .embed import EmbeddingResult, embed_grid, embed_l2
from .extrapolate import ExtrapolatedProfile, check_extrapolation_budget, extrapolate_profile
from .oracle import (Profile, RidgeOracle, alpha_parameter, make_test_profile,
                     sample_sphere_direction)
from .pipeline import (AlgorithmConfig, Knobs, RecoveryOutput, derive_parameters,
                       reference_config, recover)
from .poly import Polynomial, fit_least_squares
from .stats import median, phi_star, select_typical_index

__all__ = [
    "AlgorithmConfig", "EmbeddingResult", "ExtrapolatedProfile", "Knobs", "Polynomial",
    "Profile", "RecoveryOutput", "RidgeOracle", "alpha_parameter",
    "check_extrapolation_budget", "derive_parameters", "embed_grid", "embed_l2",
    "extrapolate_profile", "fit_least_squares", "make_test_profile", "median",
    "reference_config", "phi_star", "recover", "sample_sphere_direction",
    "select_typical_index",
]
